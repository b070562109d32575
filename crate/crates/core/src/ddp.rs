//! Constrained differential dynamic programming.
//!
//! Each stage of the Bellman right-hand side is modeled as a quadratic in the
//! state and control deviations from a nominal trajectory: the stage cost is
//! already quadratic, the dynamics are linear, the escape cost is replaced by a
//! local weighted quadratic fit and the next value function is the quadratic
//! produced one stage later. The scalar control is then box-constrained by the
//! state and actuator bounds, giving a linear feedback law `δa = α + β·δx`.

use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix6, RowVector2, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::deterministic::pessimistic_trajectory;
use crate::error::{GlosaError, Result};
use crate::escape::EscapeCache;
use crate::model::{step_kinematics, LimitKind, Scenario, Trajectory, VehicleState};

/// Floor on the control curvature.
pub const MIN_CURVATURE: f64 = 1e-8;

/// `Q(δx, δa) = ½δxᵀAδx + δxᵀBδa + ½Cδa² + Dδa + Eᵀδx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticStageModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: f64,
    pub d: f64,
    pub e: Vector2<f64>,
}

impl QuadraticStageModel {
    pub fn eval(&self, dx: Vector2<f64>, da: f64) -> f64 {
        0.5 * dx.dot(&(self.a * dx)) + dx.dot(&self.b) * da + 0.5 * self.c * da * da + self.d * da + self.e.dot(&dx)
    }

    /// `∂Q/∂δa`.
    pub fn control_gradient(&self, dx: Vector2<f64>, da: f64) -> f64 {
        self.b.dot(&dx) + self.c * da + self.d
    }
}

/// `δa(δx) = α + β·δx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackGain {
    pub alpha: f64,
    pub beta: RowVector2<f64>,
    /// Bound active at the nominal state, if any.
    pub active: Option<(LimitKind, bool)>,
}

impl FeedbackGain {
    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: RowVector2::zeros(),
            active: None,
        }
    }
}

/// `p(δx, δv) = p1δx² + p2δv² + p3δxδv + p4δx + p5δv + p6` around a center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeQuadFit {
    pub center: VehicleState,
    pub p: [f64; 6],
    /// The Hessian had a negative eigenvalue that was clamped.
    pub projected: bool,
}

impl EscapeQuadFit {
    pub fn hessian(&self) -> Matrix2<f64> {
        let p = &self.p;
        Matrix2::new(2.0 * p[0], p[2], p[2], 2.0 * p[1])
    }

    pub fn gradient(&self) -> Vector2<f64> {
        Vector2::new(self.p[3], self.p[4])
    }

    pub fn eval(&self, s: VehicleState) -> f64 {
        let (dx, dv) = (s.x - self.center.x, s.v - self.center.v);
        let p = &self.p;
        p[0] * dx * dx + p[1] * dv * dv + p[2] * dx * dv + p[3] * dx + p[4] * dv + p[5]
    }
}

/// Sample offsets and weights for the local escape fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    /// Offset in position (m).
    pub hx: f64,
    /// Offset in speed (m/s).
    pub hv: f64,
    /// Tricube bandwidth in units of the normalized offset.
    pub bandwidth: f64,
    /// Clamp negative Hessian eigenvalues of the fit to zero. Off by default:
    /// the escape cost is genuinely indefinite in `(x, v)` and clamping
    /// discards the coupling term; convexity in the control is ensured by the
    /// curvature floor instead.
    pub project_psd: bool,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            hx: 0.5,
            hv: 0.25,
            bandwidth: 2.0,
            project_psd: false,
        }
    }
}

impl Stencil {
    /// 3×3 offsets with their tricube weights.
    fn points(&self) -> [(f64, f64, f64); 9] {
        let mut out = [(0.0, 0.0, 0.0); 9];
        let mut n = 0;
        for i in -1..=1 {
            for j in -1..=1 {
                let d = ((i * i + j * j) as f64).sqrt() / self.bandwidth;
                let w = if d < 1.0 { (1.0 - d * d * d).powi(3) } else { 0.0 };
                out[n] = (i as f64 * self.hx, j as f64 * self.hv, w);
                n += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpParams {
    /// Initial step scaling in `(0, 1]`.
    pub epsilon: f64,
    /// Convergence threshold on the control change norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings tried when a forward pass increases the cost.
    pub max_halvings: usize,
    pub stencil: Stencil,
}

impl Default for DdpParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            tolerance: 1e-4,
            max_iterations: 50,
            max_halvings: 4,
            stencil: Stencil::default(),
        }
    }
}

impl DdpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon <= 1.0
            && self.tolerance > 0.0
            && self.max_iterations > 0
            && self.stencil.hx > 0.0
            && self.stencil.hv > 0.0
            && self.stencil.bandwidth > 2f64.sqrt();
        if ok {
            Ok(())
        } else {
            Err(GlosaError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Weighted least-squares quadratic through `f` sampled on the stencil around
/// `center`. A singular system is retried once with doubled offsets.
pub fn fit_quadratic<F>(center: VehicleState, stencil: &Stencil, mut f: F) -> Result<EscapeQuadFit>
where
    F: FnMut(VehicleState) -> Result<f64>,
{
    let mut st = *stencil;
    for _ in 0..2 {
        let mut normal = Matrix6::<f64>::zeros();
        let mut rhs = Vector6::<f64>::zeros();
        for (dx, dv, w) in st.points() {
            if w == 0.0 {
                continue;
            }
            let y = f(VehicleState::new(center.x + dx, center.v + dv))?;
            let phi = Vector6::new(dx * dx, dv * dv, dx * dv, dx, dv, 1.0);
            normal += w * phi * phi.transpose();
            rhs += w * y * phi;
        }
        if let Some(sol) = normal.cholesky().map(|c| c.solve(&rhs)) {
            let mut fit = EscapeQuadFit {
                center,
                p: [sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]],
                projected: false,
            };
            if stencil.project_psd {
                project_psd(&mut fit);
            }
            return Ok(fit);
        }
        st.hx *= 2.0;
        st.hv *= 2.0;
    }
    Err(GlosaError::RankDeficientFit {
        x: center.x,
        v: center.v,
    })
}

/// Local quadratic model of the escape cost around `nominal_next`.
pub fn fit_quadratic_escape(
    nominal_next: VehicleState,
    scenario: &Scenario,
    stencil: &Stencil,
) -> Result<EscapeQuadFit> {
    let cache = EscapeCache::new(scenario);
    fit_quadratic(nominal_next, stencil, |s| cache.compute(s))
}

fn project_psd(fit: &mut EscapeQuadFit) {
    let eig = fit.hessian().symmetric_eigen();
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let h = eig.eigenvectors * Matrix2::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    fit.p[0] = 0.5 * h[(0, 0)];
    fit.p[1] = 0.5 * h[(1, 1)];
    fit.p[2] = 0.5 * (h[(0, 1)] + h[(1, 0)]);
    fit.projected = true;
}

/// `V(δx) = ½δxᵀSδx + sᵀδx` (constant dropped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueQuadratic {
    pub s_mat: Matrix2<f64>,
    pub s_vec: Vector2<f64>,
}

impl ValueQuadratic {
    pub fn zero() -> Self {
        Self {
            s_mat: Matrix2::zeros(),
            s_vec: Vector2::zeros(),
        }
    }
}

fn dynamics(dt: f64) -> (Matrix2<f64>, Vector2<f64>) {
    (Matrix2::new(1.0, dt, 0.0, 1.0), Vector2::new(0.5 * dt * dt, dt))
}

/// Stage model from the nominal control, the next-state curvature `m_mat` and
/// gradient `m_vec`.
pub fn stage_model(a_nom: f64, m_mat: &Matrix2<f64>, m_vec: &Vector2<f64>, dt: f64) -> QuadraticStageModel {
    let (f, g) = dynamics(dt);
    let ft = f.transpose();
    QuadraticStageModel {
        a: ft * m_mat * f,
        b: ft * m_mat * g,
        c: 1.0 + g.dot(&(m_mat * g)),
        d: a_nom + g.dot(m_vec),
        e: ft * m_vec,
    }
}

/// Minimizer of `Q(0, ·)` within the tightest bounds at the nominal state and
/// its first-order dependence on `δx`.
pub fn solve_stage_qp(
    model: &QuadraticStageModel,
    a_nom: f64,
    state: VehicleState,
    scenario: &Scenario,
) -> FeedbackGain {
    let dt = scenario.dt;
    let limits = scenario.bounds.control_limits(state, dt);
    let (lo, lo_kind) = limits.lower();
    let (hi, hi_kind) = limits.upper();
    if lo > hi {
        return FeedbackGain::zero();
    }
    // sensitivity of each bound to the state deviation
    let row = |kind: LimitKind| match kind {
        LimitKind::Position => RowVector2::new(-2.0 / (dt * dt), -2.0 / dt),
        LimitKind::Speed => RowVector2::new(0.0, -1.0 / dt),
        LimitKind::Actuator => RowVector2::zeros(),
    };
    let free = -model.d / model.c;
    if a_nom + free > hi {
        FeedbackGain {
            alpha: hi - a_nom,
            beta: row(hi_kind),
            active: Some((hi_kind, true)),
        }
    } else if a_nom + free < lo {
        FeedbackGain {
            alpha: lo - a_nom,
            beta: row(lo_kind),
            active: Some((lo_kind, false)),
        }
    } else {
        FeedbackGain {
            alpha: free,
            beta: -model.b.transpose() / model.c,
            active: None,
        }
    }
}

/// Value quadratic `Q(δx, α + βδx)`.
pub fn propagate_value(model: &QuadraticStageModel, gain: &FeedbackGain) -> ValueQuadratic {
    let (alpha, beta) = (gain.alpha, gain.beta);
    let bb = model.b * beta;
    let s_mat = model.a + bb + bb.transpose() + model.c * beta.transpose() * beta;
    let s_vec = model.e + alpha * model.b + (model.c * alpha + model.d) * beta.transpose();
    ValueQuadratic {
        s_mat: 0.5 * (s_mat + s_mat.transpose()),
        s_vec,
    }
}

/// Result of one backward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    pub gains: Vec<FeedbackGain>,
    pub models: Vec<QuadraticStageModel>,
    /// `V(·, k)` for `k = 0..=K`.
    pub values: Vec<ValueQuadratic>,
    pub projections: usize,
}

pub fn backward_pass(
    nominal: &Trajectory,
    scenario: &Scenario,
    stencil: &Stencil,
    cache: &mut EscapeCache,
) -> Result<BackwardPass> {
    let horizon = nominal.len();
    let probs = scenario.prior.switch_probabilities();
    let mut gains = vec![FeedbackGain::zero(); horizon];
    let mut models = Vec::with_capacity(horizon);
    let mut values = vec![ValueQuadratic::zero(); horizon + 1];
    let mut projections = 0;
    for k in (0..horizon).rev() {
        let p = probs.get(k).copied().unwrap_or(0.0);
        let next = values[k + 1];
        let (mut m_mat, mut m_vec) = ((1.0 - p) * next.s_mat, (1.0 - p) * next.s_vec);
        if p > 0.0 {
            let fit = fit_quadratic(nominal.states[k + 1], stencil, |s| cache.get(s))?;
            projections += usize::from(fit.projected);
            m_mat += p * fit.hessian();
            m_vec += p * fit.gradient();
        }
        let mut model = stage_model(nominal.controls[k], &m_mat, &m_vec, scenario.dt);
        if model.c <= MIN_CURVATURE {
            model.c = MIN_CURVATURE;
            projections += 1;
        }
        let gain = solve_stage_qp(&model, nominal.controls[k], nominal.states[k], scenario);
        values[k] = propagate_value(&model, &gain);
        gains[k] = gain;
        models.push(model);
    }
    models.reverse();
    Ok(BackwardPass {
        gains,
        models,
        values,
        projections,
    })
}

/// Rolls out `a = ā + ε(α + βδx)` from the initial state, clamping each
/// control to the bounds at the actual state. Returns the trajectory (cost
/// unset) and the number of clamped controls.
pub fn forward_pass(nominal: &Trajectory, gains: &[FeedbackGain], epsilon: f64, scenario: &Scenario) -> (Trajectory, usize) {
    let dt = scenario.dt;
    let mut state = scenario.initial_state();
    let mut states = vec![state];
    let mut controls = Vec::with_capacity(nominal.len());
    let mut clamps = 0;
    for (k, gain) in gains.iter().enumerate() {
        let dx = Vector2::new(state.x - nominal.states[k].x, state.v - nominal.states[k].v);
        let wanted = nominal.controls[k] + epsilon * (gain.alpha + (gain.beta * dx)[0]);
        let (a, clamped) = scenario.bounds.control_limits(state, dt).clamp(wanted);
        clamps += usize::from(clamped);
        state = step_kinematics(state, a, dt);
        controls.push(a);
        states.push(state);
    }
    (
        Trajectory {
            states,
            controls,
            cost: f64::NAN,
        },
        clamps,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdpIteration {
    pub iteration: usize,
    pub cost: f64,
    pub epsilon: f64,
    pub control_change: f64,
    pub clamps: usize,
    pub projections: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DdpLog {
    pub initial_cost: f64,
    pub iterations: Vec<DdpIteration>,
    pub converged: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

fn control_change(a: &Trajectory, b: &Trajectory) -> f64 {
    a.controls
        .iter()
        .zip(&b.controls)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Iterates backward and forward passes from the pessimistic initializer until
/// the control update norm drops below the tolerance.
pub fn solve_ddp(scenario: &Scenario, params: &DdpParams) -> Result<(Trajectory, DdpLog)> {
    scenario.validate()?;
    let initial = pessimistic_trajectory(scenario, None)?;
    solve_ddp_from(scenario, params, initial)
}

/// [`solve_ddp`] from a given nominal trajectory.
pub fn solve_ddp_from(scenario: &Scenario, params: &DdpParams, initial: Trajectory) -> Result<(Trajectory, DdpLog)> {
    params.validate()?;
    let t0 = Instant::now();
    let mut cache = EscapeCache::new(scenario);
    let probs = scenario.prior.switch_probabilities();
    let mut nominal = initial;
    nominal.cost = cache.expected_cost(&nominal, &probs)?;
    let mut log = DdpLog {
        initial_cost: nominal.cost,
        ..Default::default()
    };
    for iteration in 1..=params.max_iterations {
        let pass = backward_pass(&nominal, scenario, &params.stencil, &mut cache)?;
        let mut epsilon = params.epsilon;
        let mut best: Option<(Trajectory, usize, f64)> = None;
        for _ in 0..=params.max_halvings {
            let (mut cand, clamps) = forward_pass(&nominal, &pass.gains, epsilon, scenario);
            cand.cost = cache.expected_cost(&cand, &probs)?;
            let better = best.as_ref().is_none_or(|b| cand.cost < b.0.cost);
            let accepted = cand.cost <= nominal.cost;
            if better {
                best = Some((cand, clamps, epsilon));
            }
            if accepted {
                break;
            }
            epsilon /= 2.0;
        }
        let (cand, clamps, epsilon) = best.expect("at least one forward pass");
        let change = control_change(&cand, &nominal);
        let improved = cand.cost <= nominal.cost;
        log.iterations.push(DdpIteration {
            iteration,
            cost: if improved { cand.cost } else { nominal.cost },
            epsilon,
            control_change: change,
            clamps,
            projections: pass.projections,
        });
        if improved {
            nominal = cand;
        }
        if change < params.tolerance || !improved {
            log.converged = change < params.tolerance;
            break;
        }
    }
    log.elapsed = t0.elapsed();
    Ok((nominal, log))
}
