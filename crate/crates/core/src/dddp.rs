//! Discrete differential dynamic programming: the grid recursion restricted
//! to a corridor around an incumbent trajectory, with the discretization
//! halved whenever a pass brings no improvement.
//!
//! The corridor half-widths are `C·Δa` in position and speed. Since the grid
//! steps scale with `Δa` too, a corridor always spans the same number of
//! nodes; halving `Δa` narrows it in state units.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::deterministic::pessimistic_trajectory;
use crate::error::{GlosaError, Result};
use crate::escape::EscapeCache;
use crate::grid::Grid;
use crate::model::{Scenario, Trajectory};
use crate::sdp::{assemble_table, backward_recursion, extract_trajectory, StageBox, Sweep};

/// Strict decrease a pass must achieve to count as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DddpParams {
    /// Initial acceleration step (m/s²).
    pub delta0: f64,
    /// Corridor multipliers `[C_x, C_v]`.
    pub corridor: [f64; 2],
    /// Smallest admissible step.
    pub delta_floor: f64,
    pub max_iterations: usize,
}

impl Default for DddpParams {
    fn default() -> Self {
        Self {
            delta0: 0.5,
            corridor: [20.0, 4.0],
            delta_floor: 0.125,
            max_iterations: 100,
        }
    }
}

impl DddpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta0 > 0.0
            && self.delta_floor > 0.0
            && self.delta0 >= self.delta_floor
            && self.corridor.iter().all(|c| *c >= 0.0 && c.is_finite())
            && self.max_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(GlosaError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// One corridor pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DddpIteration {
    pub iteration: usize,
    pub delta: f64,
    pub dx: f64,
    /// Corridor half-widths in position (m) and speed (m/s).
    pub width_x: f64,
    pub width_v: f64,
    /// Cost of the pass result.
    pub cost: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DddpIterationLog {
    /// Expected cost of the initial incumbent.
    pub initial_cost: f64,
    pub iterations: Vec<DddpIteration>,
    /// Stopped by the termination rule rather than the iteration limit.
    pub converged: bool,
    pub escape_evaluations: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl DddpIterationLog {
    /// Cost of the accepted incumbent after each pass.
    pub fn incumbent_costs(&self) -> Vec<f64> {
        let mut best = self.initial_cost;
        self.iterations
            .iter()
            .map(|it| {
                if it.improved {
                    best = it.cost;
                }
                best
            })
            .collect()
    }

    pub fn final_cost(&self) -> f64 {
        self.incumbent_costs().last().copied().unwrap_or(self.initial_cost)
    }
}

/// Best trajectory inside the corridor around `incumbent` on the grid of step
/// `delta`. The incumbent must lie on that grid.
pub fn corridor_pass(
    incumbent: &Trajectory,
    delta: f64,
    corridor: [f64; 2],
    scenario: &Scenario,
    cache: &mut EscapeCache,
) -> Result<Trajectory> {
    let grid = Grid::new(&scenario.bounds, delta, scenario.dt)?;
    let horizon = scenario.horizon();
    if incumbent.states.len() != horizon + 1 {
        return Err(GlosaError::InvalidParams(format!(
            "incumbent has {} states, horizon is {horizon}",
            incumbent.states.len()
        )));
    }
    let rx = (corridor[0] * delta / grid.dx + 1e-9).floor() as i64;
    let rv = (corridor[1] * delta / grid.dv + 1e-9).floor() as i64;
    let mut boxes = Vec::with_capacity(horizon + 1);
    for s in &incumbent.states {
        let (ix, iv) = grid
            .indices(*s)
            .filter(|(ix, iv)| grid.contains(*ix, *iv))
            .ok_or_else(|| GlosaError::GridNotClosed(format!("incumbent state {s:?} is off the Δ = {delta} grid")))?;
        boxes.push(StageBox::around(&grid, ix, iv, rx, rv));
    }

    let probs = scenario.prior.switch_probabilities();
    let mut escape: Vec<Option<Vec<f64>>> = vec![None; horizon];
    let needed: Vec<_> = (0..horizon)
        .filter(|&k| probs[k] > 0.0)
        .flat_map(|k| boxes[k + 1].nodes().map(|(ix, iv)| grid.state(ix, iv)).collect::<Vec<_>>())
        .collect();
    cache.fill(&needed)?;
    for k in (0..horizon).filter(|&k| probs[k] > 0.0) {
        escape[k] = Some(
            boxes[k + 1]
                .nodes()
                .map(|(ix, iv)| cache.cached(grid.state(ix, iv)))
                .collect(),
        );
    }
    let escape_refs: Vec<Option<&[f64]>> = escape.iter().map(|e| e.as_deref()).collect();
    let out = backward_recursion(&Sweep {
        grid: &grid,
        boxes: &boxes,
        probs: &probs,
        escape: &escape_refs,
    });
    let start = grid.indices(incumbent.states[0]).expect("checked above");
    let table = assemble_table(grid, boxes, out, start);
    extract_trajectory(&table)
}

/// Iterates corridor passes from the pessimistic initializer. After a pass
/// without improvement the step is halved; the run stops when a pass right
/// after a halving brings nothing or the step would drop below the floor.
pub fn solve_dddp(scenario: &Scenario, params: &DddpParams) -> Result<(Trajectory, DddpIterationLog)> {
    let mut cache = EscapeCache::new(scenario);
    solve_dddp_with(scenario, params, &mut cache, None)
}

/// [`solve_dddp`] with a caller-owned escape cache and an optional initial
/// incumbent (which must lie on the `delta0` grid).
pub fn solve_dddp_with(
    scenario: &Scenario,
    params: &DddpParams,
    cache: &mut EscapeCache,
    initial: Option<Trajectory>,
) -> Result<(Trajectory, DddpIterationLog)> {
    scenario.validate()?;
    params.validate()?;
    let t0 = Instant::now();
    let evaluations0 = cache.evaluations();
    let probs = scenario.prior.switch_probabilities();
    let mut incumbent = match initial {
        Some(t) => t,
        None => pessimistic_trajectory(scenario, Some(params.delta0))?,
    };
    incumbent.cost = cache.expected_cost(&incumbent, &probs)?;

    let mut log = DddpIterationLog {
        initial_cost: incumbent.cost,
        ..Default::default()
    };
    let mut delta = params.delta0;
    let mut just_halved = false;
    for iteration in 1..=params.max_iterations {
        let candidate = corridor_pass(&incumbent, delta, params.corridor, scenario, cache)?;
        let improved = candidate.cost < incumbent.cost - IMPROVEMENT_TOL;
        log.iterations.push(DddpIteration {
            iteration,
            delta,
            dx: 0.5 * delta * scenario.dt * scenario.dt,
            width_x: params.corridor[0] * delta,
            width_v: params.corridor[1] * delta,
            cost: candidate.cost,
            improved,
        });
        if improved {
            incumbent = candidate;
            just_halved = false;
            continue;
        }
        if just_halved || delta / 2.0 < params.delta_floor - 1e-12 {
            log.converged = true;
            break;
        }
        delta /= 2.0;
        just_halved = true;
    }
    log.escape_evaluations = cache.evaluations() - evaluations0;
    log.elapsed = t0.elapsed();
    Ok((incumbent, log))
}
