//! Backward stochastic dynamic programming on the closed grid.
//!
//! For `k = K−1, …, 0` and every node of the stage domain:
//! `V(x, k) = min_a ½a² + p(0|k)·J(x') + (1 − p(0|k))·V(x', k+1)`, with
//! `V(·, K) = 0` and transitions leaving the domain excluded. The recursion
//! kernel works on per-stage index boxes so the corridor solver reuses it.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{GlosaError, Result};
use crate::escape::EscapeCache;
use crate::grid::{Grid, TIE_TOLERANCE};
use crate::model::{Scenario, Trajectory, VehicleState};

/// Rectangular block of grid nodes `[ix0, ix0+nx) × [iv0, iv0+nv)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageBox {
    pub ix0: i64,
    pub iv0: i64,
    pub nx: usize,
    pub nv: usize,
}

impl StageBox {
    pub fn full(grid: &Grid) -> Self {
        Self {
            ix0: 0,
            iv0: 0,
            nx: grid.nx,
            nv: grid.nv,
        }
    }

    /// Box of nodes within `rx`/`rv` index steps of `(ix, iv)`, cut to the grid.
    pub fn around(grid: &Grid, ix: i64, iv: i64, rx: i64, rv: i64) -> Self {
        let x_lo = (ix - rx).max(0);
        let x_hi = (ix + rx).min(grid.nx as i64 - 1);
        let v_lo = (iv - rv).max(0);
        let v_hi = (iv + rv).min(grid.nv as i64 - 1);
        Self {
            ix0: x_lo,
            iv0: v_lo,
            nx: (x_hi - x_lo + 1).max(0) as usize,
            nv: (v_hi - v_lo + 1).max(0) as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat offset of a node, if it lies inside the box.
    #[inline]
    pub fn offset(&self, ix: i64, iv: i64) -> Option<usize> {
        let rx = ix - self.ix0;
        let rv = iv - self.iv0;
        if rx < 0 || rv < 0 || rx as usize >= self.nx || rv as usize >= self.nv {
            None
        } else {
            Some(rx as usize * self.nv + rv as usize)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.nx as i64).flat_map(move |rx| (0..self.nv as i64).map(move |rv| (self.ix0 + rx, self.iv0 + rv)))
    }
}

const NO_CONTROL: i16 = -1;

/// Cost-to-go and optimal control per stage and node.
#[derive(Debug, Clone)]
pub struct ValuePolicyTable {
    pub grid: Grid,
    /// Stage domains for `k = 0..=K`.
    pub boxes: Vec<StageBox>,
    values: Vec<Vec<f64>>,
    policy: Vec<Vec<i16>>,
    /// Start node `(ix, iv)`.
    pub start: (i64, i64),
    /// Distance between the requested initial state and the start node.
    pub snap_distance: f64,
    /// Nodes with no feasible control.
    pub dead_nodes: usize,
    pub escape_evaluations: usize,
    pub escape_time: Duration,
    pub recursion_time: Duration,
}

impl ValuePolicyTable {
    pub fn horizon(&self) -> usize {
        self.boxes.len() - 1
    }

    /// `V(x, k)`; infinite outside the stage domain or when no control is feasible.
    pub fn value(&self, k: usize, ix: i64, iv: i64) -> f64 {
        self.boxes[k]
            .offset(ix, iv)
            .map_or(f64::INFINITY, |o| self.values[k][o])
    }

    /// Optimal control multiple at a node, if one exists.
    pub fn control(&self, k: usize, ix: i64, iv: i64) -> Option<i64> {
        let o = self.boxes.get(k)?.offset(ix, iv)?;
        let c = *self.policy.get(k)?.get(o)?;
        (c != NO_CONTROL).then(|| self.grid.controls[c as usize])
    }

    pub fn start_value(&self) -> f64 {
        self.value(0, self.start.0, self.start.1)
    }

    /// Rows `(x, v, V, a*)` of stage `k` for export.
    pub fn stage_rows(&self, k: usize) -> Vec<(f64, f64, f64, Option<f64>)> {
        self.boxes[k]
            .nodes()
            .map(|(ix, iv)| {
                let s = self.grid.state(ix, iv);
                let a = self.control(k, ix, iv).map(|j| self.grid.accel(j));
                (s.x, s.v, self.value(k, ix, iv), a)
            })
            .collect()
    }
}

/// Inputs of one backward sweep.
pub(crate) struct Sweep<'a> {
    pub grid: &'a Grid,
    pub boxes: &'a [StageBox],
    pub probs: &'a [f64],
    /// Escape cost over `boxes[k + 1]` for stages with `p(0|k) > 0`.
    pub escape: &'a [Option<&'a [f64]>],
}

const PARALLEL_WORK: usize = 200_000;

/// Runs the recursion; returns per-stage values and control indices.
pub(crate) fn backward_recursion(sweep: &Sweep<'_>) -> (Vec<Vec<f64>>, Vec<Vec<i16>>, usize) {
    let grid = sweep.grid;
    let horizon = sweep.boxes.len() - 1;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon + 1];
    let mut policy: Vec<Vec<i16>> = vec![Vec::new(); horizon];
    values[horizon] = vec![0.0; sweep.boxes[horizon].len()];
    let mut dead = 0;

    for k in (0..horizon).rev() {
        let here = sweep.boxes[k];
        let next = sweep.boxes[k + 1];
        let p = sweep.probs[k];
        let esc = sweep.escape[k];
        let v_next = &values[k + 1];
        let mut v_here = vec![f64::INFINITY; here.len()];
        let mut r_here = vec![NO_CONTROL; here.len()];

        let (j_min, j_max) = (grid.controls[0], *grid.controls.last().expect("non-empty control set"));
        let row = |rx: usize, vals: &mut [f64], ctrls: &mut [i16]| {
            let ix = here.ix0 + rx as i64;
            let mut phis = Vec::with_capacity(grid.controls.len());
            for rv in 0..here.nv {
                let iv = here.iv0 + rv as i64;
                // successor (ix + drift + 2iv + j, iv + j) must fall in `next`
                let x_base = ix + grid.drift + 2 * iv;
                let lo = j_min.max(next.iv0 - iv).max(next.ix0 - x_base);
                let hi = j_max
                    .min(next.iv0 + next.nv as i64 - 1 - iv)
                    .min(next.ix0 + next.nx as i64 - 1 - x_base);
                if lo > hi {
                    continue;
                }
                phis.clear();
                for j in lo..=hi {
                    let o = (x_base + j - next.ix0) as usize * next.nv + (iv + j - next.iv0) as usize;
                    let a = grid.accel(j);
                    let mut phi = 0.5 * a * a;
                    if p > 0.0 {
                        phi += p * esc.expect("escape cost for switching stage")[o];
                    }
                    if p < 1.0 {
                        let vn = v_next[o];
                        phi = if vn.is_finite() { phi + (1.0 - p) * vn } else { f64::INFINITY };
                    }
                    phis.push(phi);
                }
                if let Some(i) = argmin_preferring_small(lo, &phis) {
                    vals[rv] = phis[i];
                    ctrls[rv] = (lo + i as i64 - j_min) as i16;
                }
            }
        };

        if here.len() * grid.controls.len() >= PARALLEL_WORK {
            v_here
                .par_chunks_mut(here.nv)
                .zip(r_here.par_chunks_mut(here.nv))
                .enumerate()
                .for_each(|(rx, (vals, ctrls))| row(rx, vals, ctrls));
        } else {
            v_here
                .chunks_mut(here.nv)
                .zip(r_here.chunks_mut(here.nv))
                .enumerate()
                .for_each(|(rx, (vals, ctrls))| row(rx, vals, ctrls));
        }
        dead += r_here.iter().filter(|c| **c == NO_CONTROL).count();
        values[k] = v_here;
        policy[k] = r_here;
    }
    (values, policy, dead)
}

/// Same rule as [`crate::grid::argmin_tiebreak`] over consecutive control
/// multiples starting at `j0`.
#[inline]
fn argmin_preferring_small(j0: i64, phis: &[f64]) -> Option<usize> {
    let best = phis.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let mut pick: Option<usize> = None;
    for (i, &phi) in phis.iter().enumerate() {
        if phi - best > TIE_TOLERANCE {
            continue;
        }
        pick = match pick {
            None => Some(i),
            Some(q) => {
                let (jq, ji) = (j0 + q as i64, j0 + i as i64);
                if ji.abs() < jq.abs() || (ji.abs() == jq.abs() && ji > jq) {
                    Some(i)
                } else {
                    Some(q)
                }
            }
        };
    }
    pick
}

/// Full-grid solve at discretization `delta`.
pub fn solve_sdp(scenario: &Scenario, delta: f64) -> Result<ValuePolicyTable> {
    scenario.validate()?;
    let grid = Grid::new(&scenario.bounds, delta, scenario.dt)?;
    let (start, snap_distance) = grid.snap(scenario.initial_state());
    let horizon = scenario.horizon();
    let probs = scenario.prior.switch_probabilities();
    let boxes = vec![StageBox::full(&grid); horizon + 1];

    let t0 = Instant::now();
    let full = StageBox::full(&grid);
    let escape: Vec<f64> = {
        let nodes: Vec<(i64, i64)> = full.nodes().collect();
        let cache = EscapeCache::new(scenario);
        nodes
            .par_iter()
            .map(|&(ix, iv)| cache.compute(grid.state(ix, iv)))
            .collect::<Result<Vec<f64>>>()?
    };
    let escape_time = t0.elapsed();

    let t1 = Instant::now();
    let per_stage: Vec<Option<&[f64]>> = probs
        .iter()
        .map(|&p| (p > 0.0).then_some(escape.as_slice()))
        .collect();
    let (values, policy, dead_nodes) = backward_recursion(&Sweep {
        grid: &grid,
        boxes: &boxes,
        probs: &probs,
        escape: &per_stage,
    });
    let recursion_time = t1.elapsed();

    Ok(ValuePolicyTable {
        escape_evaluations: escape.len(),
        grid,
        boxes,
        values,
        policy,
        start,
        snap_distance,
        dead_nodes,
        escape_time,
        recursion_time,
    })
}

/// Rolls the policy forward from the start node assuming the light never
/// switches. The trajectory cost is the start value.
pub fn extract_trajectory(table: &ValuePolicyTable) -> Result<Trajectory> {
    let grid = &table.grid;
    let (mut ix, mut iv) = table.start;
    let mut states = vec![grid.state(ix, iv)];
    let mut controls = Vec::with_capacity(table.horizon());
    for k in 0..table.horizon() {
        let j = table.control(k, ix, iv).ok_or(if k == 0 {
            GlosaError::Infeasible
        } else {
            GlosaError::RolloutLeftGrid { k }
        })?;
        (ix, iv) = grid.next(ix, iv, j);
        if table.boxes[k + 1].offset(ix, iv).is_none() {
            return Err(GlosaError::RolloutLeftGrid { k: k + 1 });
        }
        controls.push(grid.accel(j));
        states.push(grid.state(ix, iv));
    }
    Ok(Trajectory {
        states,
        controls,
        cost: table.start_value(),
    })
}

/// Start node of a table as a state.
pub fn start_state(table: &ValuePolicyTable) -> VehicleState {
    table.grid.state(table.start.0, table.start.1)
}

pub(crate) fn assemble_table(
    grid: Grid,
    boxes: Vec<StageBox>,
    sweep_out: (Vec<Vec<f64>>, Vec<Vec<i16>>, usize),
    start: (i64, i64),
) -> ValuePolicyTable {
    let (values, policy, dead_nodes) = sweep_out;
    ValuePolicyTable {
        grid,
        boxes,
        values,
        policy,
        start,
        snap_distance: 0.0,
        dead_nodes,
        escape_evaluations: 0,
        escape_time: Duration::ZERO,
        recursion_time: Duration::ZERO,
    }
}
