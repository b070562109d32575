//! Closed state/control grid for the discrete dynamic programs.
//!
//! With acceleration step `Δ`, speed step `Δ·T` and position step `½·Δ·T²`,
//! one step of the double integrator maps grid nodes onto grid nodes:
//! `iv' = iv + j` and `ix' = ix + s + 2·iv + j` for control `a = j·Δ`, where
//! `s = v_min·T / Δx` is the (integer) drift of the lowest speed row.

use crate::error::{GlosaError, Result};
use crate::model::{Bounds, VehicleState};

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub delta: f64,
    pub dt: f64,
    pub x_min: f64,
    pub dx: f64,
    pub nx: usize,
    pub v_min: f64,
    pub dv: f64,
    pub nv: usize,
    /// Admissible controls as multiples of `delta`, ascending.
    pub controls: Vec<i64>,
    pub(crate) drift: i64,
}

fn count(min: f64, max: f64, step: f64) -> usize {
    ((max - min) / step + ALIGN_TOL).floor() as usize + 1
}

fn integral(v: f64) -> Option<i64> {
    let r = v.round();
    ((v - r).abs() <= ALIGN_TOL * v.abs().max(1.0)).then_some(r as i64)
}

impl Grid {
    pub fn new(bounds: &Bounds, delta: f64, dt: f64) -> Result<Self> {
        if !(delta > 0.0) || !(dt > 0.0) {
            return Err(GlosaError::InvalidParams(format!(
                "discretization {delta} and time step {dt} must be positive"
            )));
        }
        let dx = 0.5 * delta * dt * dt;
        let dv = delta * dt;
        let drift = integral(bounds.v_min * dt / dx).ok_or_else(|| {
            GlosaError::GridNotClosed(format!(
                "v_min = {} is not a multiple of Δ·T/2 = {}",
                bounds.v_min,
                0.5 * delta * dt
            ))
        })?;
        let j_lo = (bounds.a_min / delta - ALIGN_TOL).ceil() as i64;
        let j_hi = (bounds.a_max / delta + ALIGN_TOL).floor() as i64;
        if j_lo > j_hi {
            return Err(GlosaError::InvalidParams("no grid control in [a_min, a_max]".into()));
        }
        Ok(Self {
            delta,
            dt,
            x_min: bounds.x_min,
            dx,
            nx: count(bounds.x_min, bounds.x_max, dx),
            v_min: bounds.v_min,
            dv,
            nv: count(bounds.v_min, bounds.v_max, dv),
            controls: (j_lo..=j_hi).collect(),
            drift,
        })
    }

    pub fn state(&self, ix: i64, iv: i64) -> VehicleState {
        VehicleState::new(self.x_min + ix as f64 * self.dx, self.v_min + iv as f64 * self.dv)
    }

    pub fn accel(&self, j: i64) -> f64 {
        j as f64 * self.delta
    }

    /// Node indices of a state lying on the grid (not range-checked).
    pub fn indices(&self, s: VehicleState) -> Option<(i64, i64)> {
        let ix = integral((s.x - self.x_min) / self.dx)?;
        let iv = integral((s.v - self.v_min) / self.dv)?;
        Some((ix, iv))
    }

    /// Nearest node and the Euclidean snap distance.
    pub fn snap(&self, s: VehicleState) -> ((i64, i64), f64) {
        let ix = ((s.x - self.x_min) / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as i64;
        let iv = ((s.v - self.v_min) / self.dv).round().clamp(0.0, (self.nv - 1) as f64) as i64;
        let n = self.state(ix, iv);
        ((ix, iv), (n.x - s.x).hypot(n.v - s.v))
    }

    pub fn contains(&self, ix: i64, iv: i64) -> bool {
        ix >= 0 && iv >= 0 && (ix as usize) < self.nx && (iv as usize) < self.nv
    }

    /// Successor node under control multiple `j`.
    #[inline]
    pub fn next(&self, ix: i64, iv: i64, j: i64) -> (i64, i64) {
        (ix + self.drift + 2 * iv + j, iv + j)
    }

    /// Control multiple for an acceleration on the grid.
    pub fn control_index(&self, a: f64) -> Option<i64> {
        integral(a / self.delta)
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.nv
    }
}

/// Absolute tolerance under which two candidate costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the minimum-cost candidate `(acceleration, cost)`. Among costs
/// within [`TIE_TOLERANCE`] of the minimum the smallest |a| wins, and the
/// positive one at equal magnitude.
pub fn argmin_tiebreak(candidates: &[(f64, f64)]) -> Option<usize> {
    let best = candidates
        .iter()
        .map(|c| c.1)
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.1.is_finite() && c.1 - best <= TIE_TOLERANCE)
        .min_by(|(_, a), (_, b)| {
            a.0.abs()
                .total_cmp(&b.0.abs())
                .then_with(|| b.0.total_cmp(&a.0))
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{step_kinematics, Scenario};
    use proptest::prelude::*;

    #[test]
    fn tiebreak_examples() {
        assert_eq!(argmin_tiebreak(&[(-0.5, 3.0), (0.0, 3.0)]), Some(1));
        assert_eq!(argmin_tiebreak(&[(1.0, 2.0), (0.0, 3.0)]), Some(0));
        assert_eq!(argmin_tiebreak(&[(-1.0, 5.0), (1.0, 5.0)]), Some(1));
        assert_eq!(argmin_tiebreak(&[(-1.0, f64::INFINITY), (1.0, f64::INFINITY)]), None);
        assert_eq!(argmin_tiebreak(&[]), None);
    }

    #[test]
    fn reference_axis_counts() {
        let b = Scenario::reference(0.0, 5.0).bounds;
        let g = Grid::new(&b, 0.125, 1.0).unwrap();
        assert_eq!((g.nx, g.nv, g.controls.len()), (2401, 129, 49));
        assert_eq!(g.dx, 0.0625);
        let g = Grid::new(&b, 0.5, 1.0).unwrap();
        assert_eq!((g.nx, g.nv, g.controls.len()), (601, 33, 13));
    }

    #[test]
    fn off_grid_lowest_speed_is_rejected() {
        let mut b = Scenario::reference(0.0, 5.0).bounds;
        b.v_min = 0.1;
        assert!(matches!(Grid::new(&b, 0.5, 1.0), Err(GlosaError::GridNotClosed(_))));
    }

    proptest! {
        #[test]
        fn dynamics_close_on_grid(
            ix in 0i64..600, iv in 0i64..33, j in -6i64..=6,
            delta in prop::sample::select(vec![1.0, 0.5, 0.25, 0.125]),
            dt in prop::sample::select(vec![0.5, 1.0, 2.0]),
        ) {
            let b = Bounds { x_min: -3.0, x_max: 200.0, v_min: 1.0, v_max: 20.0, a_min: -3.0, a_max: 3.0 };
            let g = Grid::new(&b, delta, dt).unwrap();
            let s = g.state(ix, iv);
            let next = step_kinematics(s, g.accel(j), dt);
            let (nx, nv) = g.next(ix, iv, j);
            let want = g.state(nx, nv);
            prop_assert!((next.x - want.x).abs() < 1e-9);
            prop_assert!((next.v - want.v).abs() < 1e-9);
            prop_assert_eq!(g.indices(next), Some((nx, nv)));
        }
    }
}
