//! Deterministic green-light speed advisory with a known switching time.
//!
//! With energy `½∫a²` and a double integrator, the fixed-horizon optimum has
//! linear acceleration `a(t) = c1 + c2·t` and a cubic position profile. The
//! free final time is penalized by `w·te` and found by a derivative-free
//! search over `te`; the signal constraint adds a second segment joined at the
//! signal position at the known switching time.

use crate::error::{GlosaError, Result};
use crate::model::{step_kinematics, EscapeConvention, Scenario, Trajectory, VehicleState};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Search settings for the free final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonSearch {
    pub te_lo: f64,
    pub te_hi: f64,
    pub tol: f64,
    pub scan_points: usize,
}

impl Default for HorizonSearch {
    fn default() -> Self {
        Self {
            te_lo: 0.1,
            te_hi: 200.0,
            tol: 1e-6,
            scan_points: 40,
        }
    }
}

/// One cubic piece of a deterministic trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub duration: f64,
    pub start: VehicleState,
    pub end: VehicleState,
    /// Acceleration at the start of the segment.
    pub c1: f64,
    /// Jerk (constant over the segment).
    pub c2: f64,
}

impl Segment {
    fn new(t_start: f64, start: VehicleState, end: VehicleState, duration: f64) -> Self {
        let (c1, c2) = cubic_coefficients(start, end, duration);
        Self {
            t_start,
            duration,
            start,
            end,
            c1,
            c2,
        }
    }

    /// State at local time `tau ∈ [0, duration]`.
    pub fn state_at(&self, tau: f64) -> VehicleState {
        let VehicleState { x, v } = self.start;
        VehicleState {
            x: x + v * tau + self.c1 * tau * tau / 2.0 + self.c2 * tau * tau * tau / 6.0,
            v: v + self.c1 * tau + self.c2 * tau * tau / 2.0,
        }
    }

    pub fn accel_at(&self, tau: f64) -> f64 {
        self.c1 + self.c2 * tau
    }

    pub fn energy(&self) -> f64 {
        energy_of(self.c1, self.c2, self.duration)
    }

    /// Lowest speed over the segment (speed is quadratic in time).
    pub fn min_speed(&self) -> f64 {
        let mut m = self.start.v.min(self.state_at(self.duration).v);
        if self.c2 != 0.0 {
            let tau = -self.c1 / self.c2;
            if tau > 0.0 && tau < self.duration {
                m = m.min(self.state_at(tau).v);
            }
        }
        m
    }

    /// Largest position over the segment.
    pub fn max_position(&self) -> f64 {
        // stationary points of x are the roots of v(τ) = 0
        let mut m = self.start.x.max(self.state_at(self.duration).x);
        for tau in speed_roots(self.start.v, self.c1, self.c2) {
            if tau > 0.0 && tau < self.duration {
                m = m.max(self.state_at(tau).x);
            }
        }
        m
    }
}

fn speed_roots(v0: f64, c1: f64, c2: f64) -> Vec<f64> {
    // v0 + c1 τ + c2 τ²/2 = 0
    if c2.abs() < 1e-300 {
        if c1.abs() < 1e-300 {
            return vec![];
        }
        return vec![-v0 / c1];
    }
    let (a, b, c) = (c2 / 2.0, c1, v0);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    vec![(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
}

/// Solution of a deterministic problem: one or two cubic segments.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicSolution {
    /// Final time (s).
    pub te: f64,
    /// Time at which the signal position is crossed, when it is crossed.
    pub t_signal: Option<f64>,
    /// `w·te + ½∫a²`.
    pub cost: f64,
    pub segments: Vec<Segment>,
    /// The first segment passes the signal position before its end. Interior
    /// path constraints are not enforced.
    pub overshoots_signal: bool,
}

impl DeterministicSolution {
    fn segment_at(&self, t: f64) -> (&Segment, f64) {
        let seg = self
            .segments
            .iter()
            .find(|s| t <= s.t_start + s.duration)
            .unwrap_or_else(|| self.segments.last().expect("at least one segment"));
        (seg, (t - seg.t_start).clamp(0.0, seg.duration))
    }

    /// State at time `t`, held at the final state after `te`.
    pub fn state_at(&self, t: f64) -> VehicleState {
        let (seg, tau) = self.segment_at(t);
        seg.state_at(tau)
    }

    pub fn accel_at(&self, t: f64) -> f64 {
        let (seg, tau) = self.segment_at(t);
        seg.accel_at(tau)
    }

    pub fn min_speed(&self) -> f64 {
        self.segments.iter().map(Segment::min_speed).fold(f64::INFINITY, f64::min)
    }

    pub fn energy(&self) -> f64 {
        self.segments.iter().map(Segment::energy).sum()
    }
}

/// Coefficients of `a(t) = c1 + c2·t` steering `start` to `end` in `te`.
pub fn cubic_coefficients(start: VehicleState, end: VehicleState, te: f64) -> (f64, f64) {
    // position deficit relative to cruising at the initial speed
    let deficit = end.x - start.x - start.v * te;
    let dv = end.v - start.v;
    let c1 = (6.0 * deficit - 2.0 * dv * te) / (te * te);
    let c2 = (6.0 * dv * te - 12.0 * deficit) / (te * te * te);
    (c1, c2)
}

#[inline]
fn energy_of(c1: f64, c2: f64, te: f64) -> f64 {
    0.5 * (c1 * c1 * te + c1 * c2 * te * te + c2 * c2 * te * te * te / 3.0)
}

/// Minimum of `½∫a²` over trajectories from `start` to `end` in exactly `te`.
pub fn min_energy_cost(start: VehicleState, end: VehicleState, te: f64) -> Result<f64> {
    if !(te > 0.0) || !te.is_finite() {
        return Err(GlosaError::InvalidHorizon(te));
    }
    let (c1, c2) = cubic_coefficients(start, end, te);
    Ok(energy_of(c1, c2, te))
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Coarse scan over `points` followed by golden-section refinement inside the
/// bracket around the best sample. Returns `(argmin, min, bracket index)`.
pub(crate) fn scan_then_refine<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: f64) -> (f64, f64, usize) {
    let (best, _) = points
        .iter()
        .map(|&p| f(p))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, y)| if y < acc.1 { (i, y) } else { acc });
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    let (x, y) = golden_section(&f, lo, hi, tol);
    // the refined point can only improve on the sample
    if f(points[best]) < y {
        (points[best], f(points[best]), best)
    } else {
        (x, y, best)
    }
}

/// Optimal free final time and cost `w·te + ½∫a²` from `start` to `target`.
pub fn free_horizon_cost(
    start: VehicleState,
    target: VehicleState,
    w: f64,
    search: &HorizonSearch,
) -> Result<(f64, f64)> {
    if (target.x - start.x).abs() < 1e-12 && (target.v - start.v).abs() < 1e-12 {
        return Ok((0.0, 0.0));
    }
    // ½∫a² = 6D²/τ³ − 6Ds/τ² + 2q/τ for the cubic joining the two states
    let d = target.x - start.x;
    let sum = start.v + target.v;
    let q = start.v * start.v + start.v * target.v + target.v * target.v;
    let cost = |te: f64| {
        let r = 1.0 / te;
        w * te + r * (2.0 * q + r * (-6.0 * d * sum + r * 6.0 * d * d))
    };
    let slope = |te: f64| {
        let r = 1.0 / te;
        w - r * r * (2.0 * q + r * (-12.0 * d * sum + r * 18.0 * d * d))
    };
    let curvature = |te: f64| {
        let r = 1.0 / te;
        r * r * r * (4.0 * q + r * (-36.0 * d * sum + r * 72.0 * d * d))
    };
    let n = search.scan_points.max(3);
    let ratio = (search.te_hi / search.te_lo).powf(1.0 / (n - 1) as f64);
    let mut points = [0.0; 256];
    let n = n.min(points.len());
    let mut t = search.te_lo;
    for p in points.iter_mut().take(n) {
        *p = t;
        t *= ratio;
    }
    points[n - 1] = search.te_hi;
    let points = &points[..n];
    let idx = points
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &p)| {
            let y = cost(p);
            if y < acc.1 {
                (i, y)
            } else {
                acc
            }
        })
        .0;
    let (lo, hi) = (points[idx.saturating_sub(1)], points[(idx + 1).min(n - 1)]);
    let te = if slope(lo) < 0.0 && slope(hi) > 0.0 {
        newton_in_bracket(slope, curvature, points[idx], lo, hi)
    } else {
        golden_section(cost, lo, hi, search.tol).0
    };
    let j = cost(te);
    let at_edge = (idx == 0 && te - search.te_lo <= search.tol)
        || (idx == n - 1 && search.te_hi - te <= search.tol);
    if at_edge {
        return Err(GlosaError::BracketExhausted {
            lo: search.te_lo,
            hi: search.te_hi,
        });
    }
    Ok((te, j))
}

/// Root of `g` in `[a, b]` with `g(a) < 0 < g(b)`: Newton steps, bisection
/// whenever a step leaves the bracket. Stops at a relative step of 1e-10,
/// which leaves the (flat) objective exact to rounding.
fn newton_in_bracket(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, mut x: f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..100 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let d = dg(x);
        let mut next = if d > 0.0 { x - gx / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 1e-10 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Free-horizon solution from `state` to `target` with no signal constraint.
pub fn unconstrained_glosa(state: VehicleState, target: VehicleState, w: f64) -> Result<DeterministicSolution> {
    unconstrained_with(state, target, w, f64::INFINITY, &HorizonSearch::default())
}

fn unconstrained_with(
    state: VehicleState,
    target: VehicleState,
    w: f64,
    signal_x: f64,
    search: &HorizonSearch,
) -> Result<DeterministicSolution> {
    if !(w > 0.0) {
        return Err(GlosaError::InvalidScenario("w must be positive".into()));
    }
    let (te, cost) = free_horizon_cost(state, target, w, search)?;
    let seg = Segment::new(0.0, state, target, te);
    let t_signal = crossing_time(&seg, signal_x);
    Ok(DeterministicSolution {
        te,
        t_signal,
        cost,
        segments: vec![seg],
        overshoots_signal: false,
    })
}

/// First time the segment reaches position `x1`, if it does.
fn crossing_time(seg: &Segment, x1: f64) -> Option<f64> {
    if !x1.is_finite() {
        return None;
    }
    if seg.start.x >= x1 {
        return Some(0.0);
    }
    const SAMPLES: usize = 400;
    let mut prev = 0.0;
    for i in 1..=SAMPLES {
        let t = seg.duration * i as f64 / SAMPLES as f64;
        if seg.state_at(t).x >= x1 {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if seg.state_at(mid).x >= x1 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

/// Cost-to-go once the light has turned green, from `state` to `target` with
/// no signal constraint, charged according to `convention`.
pub fn escape_value(
    state: VehicleState,
    target: VehicleState,
    w: f64,
    convention: EscapeConvention,
    search: &HorizonSearch,
) -> Result<f64> {
    let (te, cost) = free_horizon_cost(state, target, w, search)?;
    Ok(match convention {
        EscapeConvention::RemainingHorizon => cost,
        EscapeConvention::EnergyOnly if te == 0.0 => 0.0,
        EscapeConvention::EnergyOnly => min_energy_cost(state, target, te)?,
    })
}

/// Escape cost of the scenario at the state reached when the light switches.
///
/// Only the remaining trajectory is charged, so the result does not depend
/// on the switching step `k1`.
pub fn escape_cost(state: VehicleState, _k1: usize, scenario: &Scenario) -> Result<f64> {
    escape_value(
        state,
        scenario.target(),
        scenario.w,
        scenario.escape,
        &HorizonSearch::default(),
    )
}

/// Deterministic problem with the light switching to green at the known time
/// `t1`: the signal position may not be passed before `t1`.
pub fn constrained_glosa(scenario: &Scenario, t1: f64) -> Result<DeterministicSolution> {
    constrained_glosa_with(scenario, t1, &HorizonSearch::default())
}

pub fn constrained_glosa_with(scenario: &Scenario, t1: f64, search: &HorizonSearch) -> Result<DeterministicSolution> {
    if !(t1 >= 0.0) {
        return Err(GlosaError::InvalidScenario(format!("switching time {t1} is negative")));
    }
    let start = scenario.initial_state();
    let target = scenario.target();
    let x1 = scenario.x1;
    if t1 > 0.0 && start.x > x1 {
        return Err(GlosaError::InvalidScenario(
            "vehicle is past the signal while it is red".into(),
        ));
    }
    let free = unconstrained_with(start, target, scenario.w, x1, search)?;
    match free.t_signal {
        Some(ts) if ts >= t1 => return Ok(free),
        None => return Ok(free),
        _ => {}
    }
    if t1 == 0.0 {
        return Ok(free);
    }

    // Cross exactly at t1 with speed vS, then continue freely.
    let cross = |vs: f64| VehicleState::new(x1, vs);
    let total = |vs: f64| -> f64 {
        let first = match min_energy_cost(start, cross(vs), t1) {
            Ok(e) => e,
            Err(_) => return f64::INFINITY,
        };
        match free_horizon_cost(cross(vs), target, scenario.w, search) {
            Ok((_, tail)) => first + scenario.w * t1 + tail,
            Err(_) => f64::INFINITY,
        }
    };
    let v_hi = scenario.bounds.v_max.max(0.0);
    let n = 33;
    let points: Vec<f64> = (0..n).map(|i| v_hi * i as f64 / (n - 1) as f64).collect();
    let (vs, cost, _) = scan_then_refine(total, &points, search.tol);
    if !cost.is_finite() {
        return Err(GlosaError::BracketExhausted {
            lo: search.te_lo,
            hi: search.te_hi,
        });
    }
    let (te2, _) = free_horizon_cost(cross(vs), target, scenario.w, search)?;
    let first = Segment::new(0.0, start, cross(vs), t1);
    let second = Segment::new(t1, cross(vs), target, te2);
    let overshoots_signal = first.max_position() > x1 + 1e-9;
    Ok(DeterministicSolution {
        te: t1 + te2,
        t_signal: Some(t1),
        cost,
        segments: vec![first, second],
        overshoots_signal,
    })
}

/// Discrete trajectory following the deterministic solution for the latest
/// possible switch, `t1 = k_max·T`.
///
/// Without `step`, controls are the finite differences of the sampled speed,
/// clamped to what keeps the next state in bounds. With `step`, each control is
/// the multiple of `step` whose successor is closest to the sampled state (in
/// grid units) among those from which braking still respects the bounds up to
/// the horizon; plain rounding of the finite differences lets the position
/// drift past the signal.
pub fn pessimistic_trajectory(scenario: &Scenario, step: Option<f64>) -> Result<Trajectory> {
    let horizon = scenario.horizon();
    let dt = scenario.dt;
    let bounds = scenario.bounds;
    let sol = constrained_glosa(scenario, horizon as f64 * dt)?;
    let mut state = scenario.initial_state();
    let mut states = vec![state];
    let mut controls = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let t = k as f64 * dt;
        let reference = sol.state_at(t + dt);
        let limits = bounds.control_limits(state, dt);
        let a = match step {
            None => limits.clamp((reference.v - sol.state_at(t).v) / dt).0,
            Some(h) => {
                let (lo, _) = limits.lower();
                let (hi, _) = limits.upper();
                let j_lo = (lo / h - 1e-9).ceil() as i64;
                let j_hi = (hi / h + 1e-9).floor() as i64;
                let (sx, sv) = (0.5 * h * dt * dt, h * dt);
                let score = |a: f64| {
                    let n = step_kinematics(state, a, dt);
                    ((n.x - reference.x) / sx).powi(2) + ((n.v - reference.v) / sv).powi(2)
                };
                let viable = |a: f64| braking_stays_in_bounds(scenario, step_kinematics(state, a, dt), horizon - k - 1);
                let candidates: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * h).collect();
                let best = |pool: &mut dyn Iterator<Item = f64>| pool.min_by(|a, b| score(*a).total_cmp(&score(*b)));
                best(&mut candidates.iter().copied().filter(|a| viable(*a)))
                    .or_else(|| best(&mut candidates.iter().copied()))
                    .unwrap_or_else(|| limits.clamp(reference.v - state.v).0)
            }
        };
        state = step_kinematics(state, a, dt);
        controls.push(a);
        states.push(state);
    }
    Ok(Trajectory {
        states,
        controls,
        cost: f64::NAN,
    })
}

/// Whether full braking, limited by the speed floor, keeps `steps` further
/// states below the position bound.
fn braking_stays_in_bounds(scenario: &Scenario, mut s: VehicleState, steps: usize) -> bool {
    let b = &scenario.bounds;
    for _ in 0..steps {
        let a = b.a_min.max((b.v_min - s.v) / scenario.dt).min(b.a_max);
        s = step_kinematics(s, a, scenario.dt);
        if s.x > b.x_max + 1e-9 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(x: f64, v: f64) -> VehicleState {
        VehicleState::new(x, v)
    }

    // Composite Simpson on the (quadratic) integrand: exact up to rounding.
    fn quadrature_energy(seg: &Segment) -> f64 {
        let n = 200;
        let h = seg.duration / n as f64;
        let f = |t: f64| 0.5 * seg.accel_at(t).powi(2);
        let mut s = f(0.0) + f(seg.duration);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn min_energy_examples() {
        assert!(min_energy_cost(vs(0.0, 10.0), vs(10.0, 10.0), 1.0).unwrap().abs() < 1e-12);
        assert!((min_energy_cost(vs(0.0, 0.0), vs(1.0, 0.0), 1.0).unwrap() - 6.0).abs() < 1e-12);
        for te in [0.3, 1.0, 7.5] {
            assert_eq!(min_energy_cost(vs(0.0, 0.0), vs(0.0, 0.0), te).unwrap(), 0.0);
        }
        assert!(min_energy_cost(vs(0.0, 0.0), vs(1.0, 0.0), 0.0).is_err());
        assert!(min_energy_cost(vs(0.0, 0.0), vs(1.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn unit_move_coefficients() {
        assert_eq!(cubic_coefficients(vs(0.0, 0.0), vs(1.0, 0.0), 1.0), (6.0, -12.0));
    }

    #[test]
    fn energy_matches_quadrature() {
        let cases = [
            (vs(0.0, 5.0), vs(220.0, 11.0), 23.0),
            (vs(50.0, 11.0), vs(150.0, 2.0), 30.0),
            (vs(3.0, 0.0), vs(-4.0, 1.5), 2.5),
        ];
        for (a, b, te) in cases {
            let seg = Segment::new(0.0, a, b, te);
            let e = min_energy_cost(a, b, te).unwrap();
            let q = quadrature_energy(&seg);
            assert!((e - q).abs() <= 1e-9 * q.abs().max(1.0), "{e} vs {q}");
        }
    }

    #[test]
    fn at_rest_on_target_costs_nothing() {
        let sol = unconstrained_glosa(vs(220.0, 0.0), vs(220.0, 0.0), 0.1).unwrap();
        assert_eq!(sol.te, 0.0);
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn cruise_bounds_the_optimum() {
        let sol = unconstrained_glosa(vs(0.0, 8.0), vs(100.0, 8.0), 0.1).unwrap();
        assert!(sol.cost <= 0.1 * 100.0 / 8.0 + 1e-12);
    }

    #[test]
    fn golden_section_agrees_with_fine_grid() {
        let (a, b, w) = (vs(0.0, 5.0), vs(220.0, 11.0), 0.1);
        let sol = unconstrained_glosa(a, b, w).unwrap();
        // exhaustive te grid at 1e-4 resolution around a wide window
        let mut best = f64::INFINITY;
        let mut te = 1.0;
        while te < 60.0 {
            best = best.min(w * te + min_energy_cost(a, b, te).unwrap());
            te += 1e-4;
        }
        assert!((sol.cost - best).abs() < 1e-6, "{} vs {}", sol.cost, best);
    }

    #[test]
    fn boundary_conditions_hold() {
        let s = Scenario::reference(0.0, 5.0);
        let sol = constrained_glosa(&s, 30.0).unwrap();
        assert_eq!(sol.segments.len(), 2);
        let end = sol.state_at(sol.te);
        assert!((end.x - 220.0).abs() < 1e-9 && (end.v - 11.0).abs() < 1e-9);
        let first = &sol.segments[0];
        let joint = first.state_at(first.duration);
        assert!((joint.x - 150.0).abs() < 1e-9);
        assert!((joint.v - sol.segments[1].start.v).abs() < 1e-12);
        assert_eq!(sol.t_signal, Some(30.0));
    }

    #[test]
    fn vacuous_constraint_is_unconstrained() {
        let s = Scenario::reference(0.0, 5.0);
        let c = constrained_glosa(&s, 0.0).unwrap();
        let u = unconstrained_glosa(s.initial_state(), s.target(), s.w).unwrap();
        assert_eq!(c.cost, u.cost);
        assert_eq!(c.segments.len(), 1);
    }

    #[test]
    fn escape_cost_ignores_switching_step() {
        let s = Scenario::reference(0.0, 5.0);
        let state = vs(140.0, 10.0);
        let a = escape_cost(state, 10, &s).unwrap();
        for k1 in [11, 20, 30] {
            assert_eq!(escape_cost(state, k1, &s).unwrap(), a);
        }
        let at_signal = escape_cost(vs(150.0, 11.0), 17, &s).unwrap();
        let direct = unconstrained_glosa(vs(150.0, 11.0), s.target(), s.w).unwrap();
        assert!((at_signal - direct.energy()).abs() < 1e-12);
        let timed = Scenario {
            escape: EscapeConvention::RemainingHorizon,
            ..s
        };
        assert_eq!(escape_cost(vs(150.0, 11.0), 17, &timed).unwrap(), direct.cost);
    }

    #[test]
    fn later_switch_costs_more_or_equal() {
        let s = Scenario::reference(0.0, 11.0);
        let u = unconstrained_glosa(s.initial_state(), s.target(), s.w).unwrap();
        for t1 in [5.0, 15.0, 25.0, 30.0] {
            assert!(constrained_glosa(&s, t1).unwrap().cost >= u.cost - 1e-12);
        }
    }
}
