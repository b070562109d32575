//! Exhaustive control-sequence enumeration on tiny instances.
//!
//! Before the switch only one path exists (the no-switch path), so open-loop
//! control sequences and policies coincide; the best sequence cost is the
//! optimal value of the stochastic problem on the grid.

use glosa_core::escape::EscapeCache;
use glosa_core::model::{Bounds, EscapeConvention};
use glosa_core::{step_kinematics, Scenario, SwitchingPrior};
use rand::Rng;

/// A small random problem: horizon ≤ 5 and 7 grid controls.
pub fn tiny_instance(rng: &mut impl Rng) -> (Scenario, f64) {
    let delta = if rng.random_bool(0.5) { 1.0 } else { 0.5 };
    let a_max = 3.0 * delta;
    let dx = 0.5 * delta;
    let x1 = rng.random_range(6..=16) as f64;
    let v_max = 4.0;
    let k_max = rng.random_range(2..=5);
    let k_min = rng.random_range(1..=k_max);
    let weights: Vec<f64> = (k_min..=k_max).map(|_| rng.random_range(0.05..1.0)).collect();
    let x0 = dx * rng.random_range(0..=(x1 / dx) as i64 / 2) as f64;
    let v0 = delta * rng.random_range(0..=(v_max / delta) as i64) as f64;
    let scenario = Scenario {
        x0,
        v0,
        xe: x1 + rng.random_range(5.0..30.0),
        ve: rng.random_range(0.5..5.0),
        x1,
        w: rng.random_range(0.05..0.5),
        dt: 1.0,
        bounds: Bounds {
            x_min: 0.0,
            x_max: x1,
            v_min: 0.0,
            v_max,
            a_min: -a_max,
            a_max,
        },
        prior: SwitchingPrior::explicit(k_min, weights).unwrap(),
        escape: if rng.random_bool(0.5) {
            EscapeConvention::EnergyOnly
        } else {
            EscapeConvention::RemainingHorizon
        },
    };
    (scenario, delta)
}

/// Nested expected cost of one control sequence, `None` if it leaves the box.
fn sequence_cost(s: &Scenario, controls: &[f64], probs: &[f64], cache: &mut EscapeCache) -> Option<f64> {
    let mut states = vec![s.initial_state()];
    for &a in controls {
        let next = step_kinematics(*states.last().unwrap(), a, s.dt);
        if !s.bounds.contains_with_slack(next, 1e-9) {
            return None;
        }
        states.push(next);
    }
    let mut tail = 0.0;
    for k in (0..controls.len()).rev() {
        let p = probs[k];
        let mut c = 0.5 * controls[k] * controls[k];
        if p > 0.0 {
            c += p * cache.get(states[k + 1]).unwrap();
        }
        if p < 1.0 {
            c += (1.0 - p) * tail;
        }
        tail = c;
    }
    Some(tail)
}

/// Best cost over every control sequence; infinite when none is feasible.
pub fn enumerate_best(s: &Scenario, delta: f64) -> f64 {
    let horizon = s.horizon();
    let probs = s.prior.switch_probabilities();
    let controls: Vec<f64> = (-3..=3).map(|j| j as f64 * delta).collect();
    let mut cache = EscapeCache::new(s);
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; horizon];
    loop {
        let seq: Vec<f64> = idx.iter().map(|&i| controls[i]).collect();
        if let Some(c) = sequence_cost(s, &seq, &probs, &mut cache) {
            best = best.min(c);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == horizon {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < controls.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
