//! Sweeps over initial conditions and corridor parameters.

use glosa_core::dddp::DddpParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::run::solve;
use crate::{Config, HarnessError, Result, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x0: f64,
    pub v0: f64,
    pub solver: &'static str,
    pub time_s: f64,
    pub cost: f64,
    pub iterations: usize,
    /// Empty on success.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub c_v: f64,
    pub c_x: f64,
    pub delta0: f64,
    pub time_s: f64,
    pub cost: f64,
    pub iterations: usize,
    pub error: String,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Runs DDDP and DDP from every `(x0, v0)`; failed cells are recorded and the
/// sweep goes on. Rows follow the cell order, DDDP before DDP.
pub fn sweep_initial_conditions(config: &Config, cells: &[(f64, f64)], jobs: usize) -> Result<Vec<SweepRow>> {
    let pool = pool(jobs)?;
    let rows: Vec<Vec<SweepRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(x0, v0)| {
                let mut cfg = config.clone();
                cfg.scenario.x0 = x0;
                cfg.scenario.v0 = v0;
                [SolverKind::Dddp, SolverKind::Ddp]
                    .into_iter()
                    .map(|solver| {
                        let res = cfg.validate().and_then(|_| solve(&cfg, solver));
                        match res {
                            Ok(out) => SweepRow {
                                x0,
                                v0,
                                solver: solver.name(),
                                time_s: out.elapsed.as_secs_f64(),
                                cost: out.trajectory.cost,
                                iterations: out.iterations,
                                error: String::new(),
                            },
                            Err(e) => SweepRow {
                                x0,
                                v0,
                                solver: solver.name(),
                                time_s: f64::NAN,
                                cost: f64::NAN,
                                iterations: 0,
                                error: e.to_string(),
                            },
                        }
                    })
                    .collect()
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// DDDP over every `(C_v, Δa0)` with `C_x = 5·C_v`.
pub fn dddp_param_sweep(config: &Config, c_v: &[f64], deltas: &[f64], jobs: usize) -> Result<Vec<ParamRow>> {
    let cells: Vec<(f64, f64)> = c_v.iter().flat_map(|&c| deltas.iter().map(move |&d| (c, d))).collect();
    let pool = pool(jobs)?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(cv, d)| {
                let mut cfg = config.clone();
                cfg.dddp = DddpParams {
                    delta0: d,
                    corridor: [5.0 * cv, cv],
                    ..config.dddp
                };
                match cfg.validate().and_then(|_| solve(&cfg, SolverKind::Dddp)) {
                    Ok(out) => ParamRow {
                        c_v: cv,
                        c_x: 5.0 * cv,
                        delta0: d,
                        time_s: out.elapsed.as_secs_f64(),
                        cost: out.trajectory.cost,
                        iterations: out.iterations,
                        error: String::new(),
                    },
                    Err(e) => ParamRow {
                        c_v: cv,
                        c_x: 5.0 * cv,
                        delta0: d,
                        time_s: f64::NAN,
                        cost: f64::NAN,
                        iterations: 0,
                        error: e.to_string(),
                    },
                }
            })
            .collect()
    }))
}
