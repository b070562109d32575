use thiserror::Error;

/// Errors raised by the solvers and the problem model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlosaError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid switching prior: {0}")]
    InvalidPrior(String),

    #[error("step {k} is outside the switching window (k_max = {k_max})")]
    OutOfWindow { k: usize, k_max: usize },

    #[error("no interior minimizer of the free-horizon cost in [{lo}, {hi}] s")]
    BracketExhausted { lo: f64, hi: f64 },

    #[error("invalid horizon {0} s (must be positive)")]
    InvalidHorizon(f64),

    #[error("grid is not closed under the dynamics: {0}")]
    GridNotClosed(String),

    #[error("policy rollout left the grid at step {k}")]
    RolloutLeftGrid { k: usize },

    #[error("no feasible control from the initial state")]
    Infeasible,

    #[error("rank-deficient escape-cost fit at ({x}, {v})")]
    RankDeficientFit { x: f64, v: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, GlosaError>;
