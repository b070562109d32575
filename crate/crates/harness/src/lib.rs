//! Benchmark harness for the stochastic speed-advisory solvers: configuration,
//! single runs with CSV/JSON output, closed-loop simulation with a realized
//! switching time, and parameter sweeps.

pub mod config;
pub mod io;
pub mod mpc;
pub mod run;
pub mod sweep;

pub use config::{Config, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] glosa_core::GlosaError),
    #[error("{solver} did not converge after {iterations} iterations")]
    NotConverged { solver: &'static str, iterations: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 1 for invalid input, 2 for non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::NotConverged { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
