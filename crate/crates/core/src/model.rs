//! Problem definition: vehicle kinematics, scenario bounds, trajectories and
//! the expected stochastic cost of a no-switch trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{GlosaError, Result};
use crate::prior::SwitchingPrior;

/// Position (m) and speed (m/s) of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
}

impl VehicleState {
    pub const fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }
}

/// Exact discrete-time double integrator with acceleration held over the step.
#[inline]
pub fn step_kinematics(s: VehicleState, a: f64, dt: f64) -> VehicleState {
    VehicleState {
        x: s.x + s.v * dt + 0.5 * a * dt * dt,
        v: s.v + a * dt,
    }
}

/// Box bounds on position, speed and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Bounds {
    pub fn contains(&self, s: VehicleState) -> bool {
        self.contains_with_slack(s, 0.0)
    }

    pub fn contains_with_slack(&self, s: VehicleState, slack: f64) -> bool {
        s.x >= self.x_min - slack
            && s.x <= self.x_max + slack
            && s.v >= self.v_min - slack
            && s.v <= self.v_max + slack
    }

    /// Acceleration interval that keeps the next state inside the box, split
    /// by origin: `(lower, upper)` from position, speed and actuator limits.
    pub fn control_limits(&self, s: VehicleState, dt: f64) -> ControlLimits {
        let dt2 = dt * dt;
        ControlLimits {
            position: (
                2.0 * (self.x_min - s.x - s.v * dt) / dt2,
                2.0 * (self.x_max - s.x - s.v * dt) / dt2,
            ),
            speed: ((self.v_min - s.v) / dt, (self.v_max - s.v) / dt),
            actuator: (self.a_min, self.a_max),
        }
    }
}

/// The six acceleration inequalities implied by the state and control box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits {
    pub position: (f64, f64),
    pub speed: (f64, f64),
    pub actuator: (f64, f64),
}

/// Which inequality realizes a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Position,
    Speed,
    Actuator,
}

impl ControlLimits {
    /// Tightest lower bound and the inequality that produced it.
    pub fn lower(&self) -> (f64, LimitKind) {
        [
            (self.position.0, LimitKind::Position),
            (self.speed.0, LimitKind::Speed),
            (self.actuator.0, LimitKind::Actuator),
        ]
        .into_iter()
        .fold((f64::NEG_INFINITY, LimitKind::Actuator), |acc, c| if c.0 > acc.0 { c } else { acc })
    }

    /// Tightest upper bound and the inequality that produced it.
    pub fn upper(&self) -> (f64, LimitKind) {
        [
            (self.position.1, LimitKind::Position),
            (self.speed.1, LimitKind::Speed),
            (self.actuator.1, LimitKind::Actuator),
        ]
        .into_iter()
        .fold((f64::INFINITY, LimitKind::Actuator), |acc, c| if c.0 < acc.0 { c } else { acc })
    }

    /// Clamps `a` into the feasible interval. When the state bounds cannot all
    /// be met, actuator limits win and then the upper position bound.
    pub fn clamp(&self, a: f64) -> (f64, bool) {
        let (lo, _) = self.lower();
        let (hi, _) = self.upper();
        if lo <= hi {
            let c = a.clamp(lo, hi);
            (c, c != a)
        } else {
            let c = hi.clamp(self.actuator.0, self.actuator.1);
            (c, true)
        }
    }
}

/// What the cost-to-go after the switch to green counts.
///
/// Both conventions follow the free-horizon optimal trajectory (final time
/// chosen by minimizing `w·te + ½∫a²`); they differ in what is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeConvention {
    /// Acceleration energy `½∫a²` of the remaining trajectory.
    #[default]
    EnergyOnly,
    /// `w·te + ½∫a²` over the remaining horizon.
    RemainingHorizon,
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x0: f64,
    pub v0: f64,
    pub xe: f64,
    pub ve: f64,
    /// Signal position (m).
    pub x1: f64,
    /// Weight on the final time.
    pub w: f64,
    /// Time step (s).
    pub dt: f64,
    pub bounds: Bounds,
    pub prior: SwitchingPrior,
    #[serde(default)]
    pub escape: EscapeConvention,
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub fields: &'static [&'static str],
    pub rule: &'static str,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.rule, self.fields.join(", "))
    }
}

impl Scenario {
    /// Scenarios of the reference study: `w = 0.1`, `T = 1 s`,
    /// `x ∈ [0, 150]`, `v ∈ [0, 16]`, `a ∈ [-3, 3]`, uniform switching on `[10, 30]`.
    pub fn reference(x0: f64, v0: f64) -> Self {
        Self {
            x0,
            v0,
            xe: 220.0,
            ve: 11.0,
            x1: 150.0,
            w: 0.1,
            dt: 1.0,
            bounds: Bounds {
                x_min: 0.0,
                x_max: 150.0,
                v_min: 0.0,
                v_max: 16.0,
                a_min: -3.0,
                a_max: 3.0,
            },
            prior: SwitchingPrior::uniform(10, 30).expect("valid window"),
            escape: EscapeConvention::EnergyOnly,
        }
    }

    /// Reference scenarios 1 to 3.
    pub fn reference_set(id: usize) -> Option<Self> {
        match id {
            1 => Some(Self::reference(0.0, 5.0)),
            2 => Some(Self::reference(0.0, 11.0)),
            3 => Some(Self::reference(50.0, 11.0)),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> VehicleState {
        VehicleState::new(self.x0, self.v0)
    }

    pub fn target(&self) -> VehicleState {
        VehicleState::new(self.xe, self.ve)
    }

    /// Number of control steps: the horizon ends at the last possible switch.
    pub fn horizon(&self) -> usize {
        self.prior.k_max()
    }

    /// Every violated invariant; empty when the scenario is valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, fields: &'static [&'static str], rule: &'static str| {
            if !ok {
                out.push(Violation { fields, rule });
            }
        };
        let b = &self.bounds;
        let finite = [
            self.x0, self.v0, self.xe, self.ve, self.x1, self.w, self.dt, b.x_min, b.x_max,
            b.v_min, b.v_max, b.a_min, b.a_max,
        ]
        .iter()
        .all(|f| f.is_finite());
        check(finite, &["*"], "all values finite");
        check(
            self.x0 <= self.x1 && self.x1 <= self.xe,
            &["x0", "x1", "xe"],
            "x0 ≤ x1 ≤ xe",
        );
        check(self.w > 0.0, &["w"], "w > 0");
        check(self.dt > 0.0, &["dt"], "T > 0");
        check(b.a_min < 0.0 && 0.0 < b.a_max, &["a_min", "a_max"], "a_min < 0 < a_max");
        check(b.v_min >= 0.0, &["v_min"], "v_min ≥ 0");
        check(b.x_min < b.x_max, &["x_min", "x_max"], "x_min < x_max");
        check(b.v_min < b.v_max, &["v_min", "v_max"], "v_min < v_max");
        check(
            b.x_min <= self.x0 && self.x0 <= b.x_max,
            &["x0", "x_min", "x_max"],
            "x_min ≤ x0 ≤ x_max",
        );
        check(
            b.v_min <= self.v0 && self.v0 <= b.v_max,
            &["v0", "v_min", "v_max"],
            "v_min ≤ v0 ≤ v_max",
        );
        check(self.prior.validate().is_ok(), &["prior"], "prior is a distribution");
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(GlosaError::InvalidScenario(msg))
        }
    }

    /// The same problem restarted from `state` at step `steps_elapsed`, given
    /// that the light has not switched yet. The prior is conditioned and
    /// re-indexed so that the restart is step 0.
    pub fn restarted(&self, state: VehicleState, steps_elapsed: usize) -> Result<Self> {
        let prior = self
            .prior
            .condition_on_no_switch(steps_elapsed)?
            .shifted(steps_elapsed)?;
        Ok(Self {
            x0: state.x,
            v0: state.v,
            prior,
            ..self.clone()
        })
    }
}

/// States for `k = 0..=K` and controls for `k = 0..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
    pub controls: Vec<f64>,
    pub cost: f64,
}

impl Trajectory {
    /// Simulates `controls` from `start`.
    pub fn simulate(start: VehicleState, controls: Vec<f64>, dt: f64) -> Self {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(start);
        for &a in &controls {
            let s = *states.last().expect("non-empty");
            states.push(step_kinematics(s, a, dt));
        }
        Self {
            states,
            controls,
            cost: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Largest deviation from the discrete dynamics.
    pub fn dynamics_residual(&self, dt: f64) -> f64 {
        self.controls
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let p = step_kinematics(self.states[k], a, dt);
                (p.x - self.states[k + 1].x)
                    .abs()
                    .max((p.v - self.states[k + 1].v).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Whether every state and control respects the bounds within `slack`.
    pub fn within_bounds(&self, bounds: &Bounds, slack: f64) -> bool {
        self.states.iter().all(|s| bounds.contains_with_slack(*s, slack))
            && self
                .controls
                .iter()
                .all(|a| *a >= bounds.a_min - slack && *a <= bounds.a_max + slack)
    }
}

/// Expected cost of following `controls` from the scenario's initial state
/// until the light switches, then the escape cost from the state at switching:
/// `Σ_k S(k)·[½a(k)² + p(0|k)·J(x(k+1))]` with survival `S(k+1) = S(k)·(1 − p(0|k))`.
pub fn expected_cost<F>(traj: &Trajectory, switch_probs: &[f64], mut escape: F) -> Result<f64>
where
    F: FnMut(VehicleState) -> Result<f64>,
{
    let mut survival = 1.0;
    let mut total = 0.0;
    for (k, &a) in traj.controls.iter().enumerate() {
        let p = switch_probs.get(k).copied().unwrap_or(0.0);
        let mut stage = 0.5 * a * a;
        if p > 0.0 {
            stage += p * escape(traj.states[k + 1])?;
        }
        total += survival * stage;
        survival *= 1.0 - p;
        if survival <= 0.0 {
            break;
        }
    }
    Ok(total)
}
