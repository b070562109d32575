//! Closed-loop simulation with a realized switching time.
//!
//! Before the switch the vehicle applies the stochastic controller; at the
//! switch it follows the deterministic free-horizon solution, whose cost is
//! charged as the tail.

use glosa_core::dddp::{solve_dddp_with, DddpParams};
use glosa_core::ddp::solve_ddp_from;
use glosa_core::deterministic::escape_cost;
use glosa_core::escape::EscapeCache;
use glosa_core::grid::Grid;
use glosa_core::sdp::ValuePolicyTable;
use glosa_core::{step_kinematics, GlosaError, Scenario, SwitchingProcess, Trajectory, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::run::{solve, SolverLog};
use crate::{Config, Result, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpcRun {
    pub seed: Option<u64>,
    pub realized_k1: usize,
    /// Controls applied before the switch.
    pub controls: Vec<f64>,
    /// State at the switch.
    pub switch_state: VehicleState,
    /// `½Σ a²` before the switch.
    pub stage_cost: f64,
    /// Deterministic cost from the switch state.
    pub tail_cost: f64,
    pub realized_cost: f64,
}

enum Plan {
    /// Value/policy table looked up at the current node.
    Table(Box<ValuePolicyTable>),
    /// Open-loop trajectory from the latest solve, indexed from its solve step.
    Trajectory { traj: Trajectory, since: usize, last_delta: f64 },
}

/// A solved controller that can be replayed against many switching times.
pub struct Controller {
    config: Config,
    solver: SolverKind,
    plan: Plan,
}

impl Controller {
    pub fn new(config: &Config, solver: SolverKind) -> Result<Self> {
        config.validate()?;
        let out = solve(config, solver)?;
        let plan = match out.log {
            SolverLog::Sdp(table) => Plan::Table(table),
            SolverLog::Dddp(log) => Plan::Trajectory {
                traj: out.trajectory,
                since: 0,
                last_delta: log.iterations.last().map_or(config.dddp.delta0, |it| it.delta),
            },
            SolverLog::Ddp(_) => Plan::Trajectory {
                traj: out.trajectory,
                since: 0,
                last_delta: 0.0,
            },
        };
        Ok(Self {
            config: config.clone(),
            solver,
            plan,
        })
    }

    /// Simulates the loop for one realization. With `resolve`, trajectory
    /// plans are recomputed at every step from the current state, warm
    /// started from the shifted previous plan (a table needs no re-solve).
    pub fn run(&self, process: &SwitchingProcess, resolve: bool) -> Result<MpcRun> {
        let scenario = &self.config.scenario;
        let k1 = process.realized_k1();
        let mut state = match &self.plan {
            // a table starts from the snapped node
            Plan::Table(table) => table.grid.state(table.start.0, table.start.1),
            Plan::Trajectory { .. } => scenario.initial_state(),
        };
        let mut controls = Vec::with_capacity(k1);
        let mut plan = match &self.plan {
            Plan::Table(_) => None,
            Plan::Trajectory { traj, since, last_delta } => Some((traj.clone(), *since, *last_delta)),
        };
        for k in 0..k1 {
            let a = match (&self.plan, plan.as_mut()) {
                (Plan::Table(table), _) => table_control(table, k, state)?,
                (_, Some((traj, since, last_delta))) => {
                    if resolve && k > 0 {
                        let restarted = scenario.restarted(state, k)?;
                        let shifted = shift(traj, k - *since);
                        let (next, delta) = self.resolve(&restarted, shifted, *last_delta)?;
                        *traj = next;
                        *since = k;
                        *last_delta = delta;
                    }
                    traj.controls[k - *since]
                }
                (_, None) => unreachable!("trajectory plans carry a trajectory"),
            };
            controls.push(a);
            state = step_kinematics(state, a, scenario.dt);
        }
        let stage_cost = controls.iter().map(|a| 0.5 * a * a).sum::<f64>();
        let tail_cost = escape_cost(state, k1, scenario)?;
        Ok(MpcRun {
            seed: None,
            realized_k1: k1,
            controls,
            switch_state: state,
            stage_cost,
            tail_cost,
            realized_cost: stage_cost + tail_cost,
        })
    }

    fn resolve(&self, scenario: &Scenario, warm: Trajectory, last_delta: f64) -> Result<(Trajectory, f64)> {
        match self.solver {
            SolverKind::Dddp => {
                // the shifted incumbent lies on the grid of the last step size
                let params = DddpParams {
                    delta0: last_delta,
                    delta_floor: self.config.dddp.delta_floor.min(last_delta),
                    ..self.config.dddp
                };
                let mut cache = EscapeCache::new(scenario);
                let (t, log) = solve_dddp_with(scenario, &params, &mut cache, Some(warm))?;
                let delta = log.iterations.last().map_or(last_delta, |it| it.delta);
                Ok((t, delta))
            }
            SolverKind::Ddp => Ok((solve_ddp_from(scenario, &self.config.ddp, warm)?.0, 0.0)),
            SolverKind::Sdp => unreachable!("tables are not re-solved"),
        }
    }
}

fn table_control(table: &ValuePolicyTable, k: usize, state: VehicleState) -> Result<f64> {
    let grid: &Grid = &table.grid;
    let (ix, iv) = grid.indices(state).ok_or(GlosaError::RolloutLeftGrid { k })?;
    let j = table.control(k, ix, iv).ok_or(GlosaError::RolloutLeftGrid { k })?;
    Ok(grid.accel(j))
}

fn shift(traj: &Trajectory, by: usize) -> Trajectory {
    Trajectory {
        states: traj.states[by..].to_vec(),
        controls: traj.controls[by..].to_vec(),
        cost: f64::NAN,
    }
}

/// Switching time drawn from the prior with one uniform number per step.
pub fn sample_process(config: &Config, seed: u64) -> SwitchingProcess {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SwitchingProcess::sample(&config.scenario.prior, || rng.random::<f64>())
}

/// One closed-loop run for `seed`.
pub fn mpc_simulate(config: &Config, solver: SolverKind, seed: u64, resolve: bool) -> Result<MpcRun> {
    let controller = Controller::new(config, solver)?;
    let mut run = controller.run(&sample_process(config, seed), resolve)?;
    run.seed = Some(seed);
    Ok(run)
}

/// Runs for seeds `first_seed..first_seed + runs` sharing one initial solve.
pub fn mpc_batch(config: &Config, solver: SolverKind, first_seed: u64, runs: usize, resolve: bool) -> Result<Vec<MpcRun>> {
    let controller = Controller::new(config, solver)?;
    (first_seed..first_seed + runs as u64)
        .map(|seed| {
            let mut run = controller.run(&sample_process(config, seed), resolve)?;
            run.seed = Some(seed);
            Ok(run)
        })
        .collect()
}
