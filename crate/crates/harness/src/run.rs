//! Single solver runs.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use glosa_core::dddp::{solve_dddp, DddpIterationLog};
use glosa_core::ddp::{solve_ddp, DdpLog};
use glosa_core::escape::EscapeCache;
use glosa_core::sdp::{extract_trajectory, solve_sdp, ValuePolicyTable};
use glosa_core::{Scenario, Trajectory};
use serde::Serialize;

use crate::io;
use crate::{Config, HarnessError, Result, SolverKind};

/// Solver-specific diagnostics of a run.
#[derive(Debug, Clone)]
pub enum SolverLog {
    Sdp(Box<ValuePolicyTable>),
    Dddp(DddpIterationLog),
    Ddp(DdpLog),
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub converged: bool,
    /// Wall time of the solve call alone.
    pub elapsed: Duration,
    pub log: SolverLog,
}

/// Runs one solver on the configured scenario.
pub fn solve(config: &Config, solver: SolverKind) -> Result<SolveOutcome> {
    solve_scenario(&config.scenario, config, solver)
}

/// Runs one solver on `scenario` with the solver settings of `config`.
pub fn solve_scenario(scenario: &Scenario, config: &Config, solver: SolverKind) -> Result<SolveOutcome> {
    let t0 = Instant::now();
    let out = match solver {
        SolverKind::Sdp => {
            let table = solve_sdp(scenario, config.sdp.delta)?;
            let elapsed = t0.elapsed();
            SolveOutcome {
                trajectory: extract_trajectory(&table)?,
                iterations: 1,
                converged: true,
                elapsed,
                log: SolverLog::Sdp(Box::new(table)),
            }
        }
        SolverKind::Dddp => {
            let (trajectory, log) = solve_dddp(scenario, &config.dddp)?;
            SolveOutcome {
                trajectory,
                iterations: log.iterations.len(),
                converged: log.converged,
                elapsed: t0.elapsed(),
                log: SolverLog::Dddp(log),
            }
        }
        SolverKind::Ddp => {
            let (trajectory, log) = solve_ddp(scenario, &config.ddp)?;
            SolveOutcome {
                trajectory,
                iterations: log.iterations.len(),
                converged: log.converged,
                elapsed: t0.elapsed(),
                log: SolverLog::Ddp(log),
            }
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario_id: Option<usize>,
    pub solver: SolverKind,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Distance from the initial state to the nearest grid node (SDP only).
    pub snap_distance: Option<f64>,
    pub trajectory_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub config: Config,
}

fn stem(config: &Config, solver: SolverKind) -> String {
    match config.scenario_id {
        Some(id) => format!("scenario{id}_{}", solver.name()),
        None => format!("custom_{}", solver.name()),
    }
}

/// Solves, then writes `<stem>_trajectory.csv`, the solver log and
/// `<stem>_report.json` into `out_dir` when given. Non-convergence is
/// reported, not raised.
pub fn run_scenario(config: &Config, solver: SolverKind, out_dir: Option<&Path>) -> Result<RunReport> {
    config.validate()?;
    let out = solve(config, solver)?;
    let mut report = RunReport {
        scenario_id: config.scenario_id,
        solver,
        cost: out.trajectory.cost,
        iterations: out.iterations,
        converged: out.converged,
        wall_time_s: out.elapsed.as_secs_f64().max(f64::MIN_POSITIVE),
        snap_distance: match &out.log {
            SolverLog::Sdp(table) => Some(table.snap_distance),
            _ => None,
        },
        trajectory_path: None,
        log_path: None,
        config: config.clone(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let stem = stem(config, solver);
        let traj_path = dir.join(format!("{stem}_trajectory.csv"));
        io::write_trajectory(&traj_path, &out.trajectory, config.scenario.dt)?;
        report.trajectory_path = Some(traj_path);
        report.log_path = match &out.log {
            SolverLog::Dddp(log) => {
                let p = dir.join(format!("{stem}_iterations.csv"));
                io::write_dddp_log(&p, log)?;
                Some(p)
            }
            SolverLog::Ddp(log) => {
                let p = dir.join(format!("{stem}_iterations.csv"));
                io::write_ddp_log(&p, log)?;
                Some(p)
            }
            SolverLog::Sdp(table) => match config.sdp.export_stage {
                Some(k) if k <= table.horizon() => {
                    let p = dir.join(format!("{stem}_stage{k}.csv"));
                    io::write_sdp_slice(&p, table, k)?;
                    Some(p)
                }
                Some(k) => return Err(HarnessError::Config(format!("export stage {k} beyond the horizon"))),
                None => None,
            },
        };
        io::write_json(&dir.join(format!("{stem}_report.json")), &report)?;
    }
    Ok(report)
}

/// Expected cost of a trajectory read back from disk, with its controls
/// re-simulated from the scenario's initial state.
pub fn recompute_cost(traj: &Trajectory, scenario: &Scenario) -> Result<f64> {
    let replay = Trajectory::simulate(scenario.initial_state(), traj.controls.clone(), scenario.dt);
    let probs = scenario.prior.switch_probabilities();
    Ok(EscapeCache::new(scenario).expected_cost(&replay, &probs)?)
}
