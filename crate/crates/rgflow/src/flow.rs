//! Time integration of the conformal-factor equation
//! `du/dt = -1/2 (R + a'/4 R^2 - r)` with an RK4 stepper, a
//! curvature-dependent CFL step, the parabolic-cone guard, and the two
//! maximum-principle companions: the Abel comparison ODE and the
//! closed-form `R^2` envelope.

use crate::curvature::{
    cone_classify_from, gradient_inner_conformal, gradient_sq_conformal, laplacian_conformal,
    normalization_r_from, reaction, scalar_curvature, Cone, ConformalState, FlowParams,
};
use crate::error::{Error, Result};
use crate::potentials;
use crate::surface::{SurfaceDomain, SurfaceKind};
use crate::util::{first_non_finite, min_max};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const DT_UNDERFLOW: f64 = 1e-12;
const ABEL_BLOW_UP_LIMIT: f64 = 1e12;

/// Steps between the three states of a residual central difference. One
/// step is too tight: the integrator's step-local jitter gets amplified by
/// 1/dt and floors the residual; three steps keep truncation dominant while
/// staying far below the 1e-3 sup-norm budget.
const RESIDUAL_FD_SPACING: usize = 3;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached `t_end`.
    Completed,
    /// A stage state left the parabolic cone; the flow would be backward
    /// parabolic there and is never integrated further.
    ConeExit,
    /// The CFL step collapsed below 1e-12.
    StepUnderflow,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "Completed",
            Termination::ConeExit => "ConeExit",
            Termination::StepUnderflow => "StepUnderflow",
        }
    }
}

/// Per-sample scalar diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub volume: f64,
    pub r: f64,
    pub min_r: f64,
    pub max_r: f64,
    /// Entropy N; absent when min R is at or below the entropy floor.
    pub entropy: Option<f64>,
    /// Max of the Harnack quantity Q; absent under the same condition.
    pub max_q: Option<f64>,
    /// Latest sup-norm residual of the scalar-curvature evolution identity.
    pub residual_r: Option<f64>,
    /// Soliton residual integral of |M|^2 (via the integral identity).
    pub msq_integral: f64,
}

/// Sup-norm residuals of the evolution identities at one interior time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSample {
    pub t: f64,
    /// d/dt R vs (1 + a'R/2) lap R + a'/2 |grad R|^2 + R (R + a'/4 R^2 - r).
    pub scalar: f64,
    /// d/dt R^2 vs (1 + a'R/2) lap R^2 - 2 |grad R|^2 + 2 R^2 (...).
    pub scalar_sq: f64,
    /// d/dt |grad R|^2 identity; needs a pointwise Hessian, so torus only.
    pub grad_sq: Option<f64>,
    /// d/dt r vs its integral expression.
    pub normalization: f64,
}

/// Completed (or cleanly terminated) run: sampled states and diagnostics.
pub struct Trajectory {
    pub domain: Arc<SurfaceDomain>,
    pub params: FlowParams,
    pub samples: Vec<(ConformalState, DiagnosticsRecord)>,
    pub sample_stride: usize,
    pub termination: Termination,
    pub final_time: f64,
    pub residual_checks: Vec<ResidualSample>,
}

impl Trajectory {
    /// r(t) at the sample times, the input for the Abel comparison.
    pub fn r_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|(_, d)| (d.t, d.r)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|(_, d)| d.t).collect()
    }
}

/// Shared core: reaction, normalization and the cone guard from a
/// precomputed curvature field and conformal area factor.
fn rhs_core(
    domain: &SurfaceDomain,
    t: f64,
    r_field: &[f64],
    e2u: &[f64],
    params: &FlowParams,
) -> Result<Vec<f64>> {
    if cone_classify_from(r_field, params.alpha_prime) != Cone::AllPlus {
        return Err(Error::ConeExit { t });
    }
    let a = params.alpha_prime;
    let weights = domain.quadrature_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut p = Vec::with_capacity(r_field.len());
    for i in 0..r_field.len() {
        let pi = r_field[i] + a / 4.0 * r_field[i] * r_field[i];
        let dmu = e2u[i] * weights[i];
        num += pi * dmu;
        den += dmu;
        p.push(pi);
    }
    let r = num / den;
    let mut out: Vec<f64> = p.iter().map(|&pi| -0.5 * (pi - r)).collect();
    if domain.dealiasing_enabled() {
        out = domain.dealias_filter(&out);
    }
    Ok(out)
}

/// Right-hand side of the conformal-factor equation. The returned field has
/// zero mean against the conformal measure by construction of `r`. Fails
/// with `ConeExit` outside the parabolic cone.
pub fn rhs_u(domain: &SurfaceDomain, state: &ConformalState, params: &FlowParams) -> Result<Vec<f64>> {
    let (r_field, e2u) = crate::curvature::curvature_with_measure(domain, state);
    rhs_core(domain, state.t, &r_field, &e2u, params)
}

/// Stability-limited step size:
/// `dt_safety * 2 / (lambda_max * max((1 + a'R/2) exp(-2u)))`.
/// The diffusion coefficient of the linearized equation is
/// `(1 + a'R/2) exp(-2u)` (the conformal factor rescales the background
/// Laplacian), so the step tracks its maximum; the factor 2 sits well
/// inside the RK4 real-axis limit of 2.785. At `u = 0` this is exactly
/// `2 dt_safety / (lambda_max * max(1 + a'R/2))`.
pub fn propose_dt(domain: &SurfaceDomain, state: &ConformalState, params: &FlowParams) -> Result<f64> {
    let (r_field, e2u) = crate::curvature::curvature_with_measure(domain, state);
    propose_dt_from(domain, state.t, &r_field, &e2u, params)
}

fn propose_dt_from(
    domain: &SurfaceDomain,
    t: f64,
    r_field: &[f64],
    e2u: &[f64],
    params: &FlowParams,
) -> Result<f64> {
    if cone_classify_from(r_field, params.alpha_prime) != Cone::AllPlus {
        return Err(Error::ConeExit { t });
    }
    let coef_max = r_field
        .iter()
        .zip(e2u)
        .map(|(&r, &e)| (1.0 + params.alpha_prime * r / 2.0) / e)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(params.dt_safety * 2.0 / (domain.lambda_max_abs() * coef_max))
}

/// RK4 stage assembly from a first-stage slope that may already be known.
fn rk4_from_k1(
    domain: &SurfaceDomain,
    state: &ConformalState,
    params: &FlowParams,
    dt: f64,
    k1: &[f64],
) -> Result<ConformalState> {
    let n = state.u.len();
    let stage = |u: &[f64], t: f64| -> Result<Vec<f64>> {
        rhs_u(domain, &ConformalState { u: u.to_vec(), t }, params).map_err(|e| match e {
            Error::ConeExit { .. } => Error::ConeExit { t: state.t },
            other => other,
        })
    };
    let mut tmp = vec![0.0; n];
    for i in 0..n {
        tmp[i] = state.u[i] + 0.5 * dt * k1[i];
    }
    let k2 = stage(&tmp, state.t + 0.5 * dt)?;
    for i in 0..n {
        tmp[i] = state.u[i] + 0.5 * dt * k2[i];
    }
    let k3 = stage(&tmp, state.t + 0.5 * dt)?;
    for i in 0..n {
        tmp[i] = state.u[i] + dt * k3[i];
    }
    let k4 = stage(&tmp, state.t + dt)?;
    let mut u_next = vec![0.0; n];
    for i in 0..n {
        u_next[i] = state.u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if let Some(i) = first_non_finite(&u_next) {
        return Err(Error::NonFiniteField { index: i });
    }
    Ok(ConformalState {
        u: u_next,
        t: state.t + dt,
    })
}

/// One classical RK4 step with an explicitly chosen step size. The
/// normalization `r` is re-evaluated inside every stage, which keeps the
/// volume drift at integrator order.
pub fn step_with_dt(
    domain: &SurfaceDomain,
    state: &ConformalState,
    params: &FlowParams,
    dt: f64,
) -> Result<ConformalState> {
    if dt < DT_UNDERFLOW {
        return Err(Error::StepUnderflow { t: state.t, dt });
    }
    let k1 = rhs_u(domain, state, params).map_err(|e| match e {
        Error::ConeExit { .. } => Error::ConeExit { t: state.t },
        other => other,
    })?;
    rk4_from_k1(domain, state, params, dt, &k1)
}

/// One CFL-limited step, sharing the curvature evaluation between the step
/// size and the first stage. `dt_cap` clamps the step (used to land on
/// `t_end`).
fn step_adaptive(
    domain: &SurfaceDomain,
    state: &ConformalState,
    params: &FlowParams,
    dt_cap: Option<f64>,
) -> Result<ConformalState> {
    let (r_field, e2u) = crate::curvature::curvature_with_measure(domain, state);
    let mut dt = propose_dt_from(domain, state.t, &r_field, &e2u, params)?;
    if let Some(cap) = dt_cap {
        dt = dt.min(cap);
    }
    if dt < DT_UNDERFLOW {
        return Err(Error::StepUnderflow { t: state.t, dt });
    }
    let k1 = rhs_core(domain, state.t, &r_field, &e2u, params)?;
    rk4_from_k1(domain, state, params, dt, &k1)
}

/// One step at the CFL-limited size.
pub fn step(domain: &SurfaceDomain, state: &ConformalState, params: &FlowParams) -> Result<ConformalState> {
    step_adaptive(domain, state, params, None)
}

struct WarmStarts {
    f: Option<Vec<f64>>,
    w: Option<Vec<f64>>,
}

fn sample_diagnostics(
    domain: &SurfaceDomain,
    state: &ConformalState,
    params: &FlowParams,
    warm: &mut WarmStarts,
    latest_residual: Option<f64>,
) -> Result<DiagnosticsRecord> {
    let r_field = scalar_curvature(domain, state);
    let (min_r, max_r) = min_max(&r_field);
    let volume = domain.volume(&state.u);
    let r = normalization_r_from(domain, state, &r_field, params.alpha_prime);

    let pair = potentials::potentials_with_guess(
        domain,
        state,
        params,
        warm.f.as_deref(),
        warm.w.as_deref(),
    )?;
    warm.f = Some(pair.f.clone());
    warm.w = Some(pair.w.clone());
    let (msq_integral, _) = potentials::soliton_residual_integrals(domain, state, &pair, params);

    let positive = min_r > params.entropy_floor;
    let entropy = if positive {
        Some(potentials::entropy(domain, state, params)?)
    } else {
        None
    };
    let max_q = if positive {
        let (_, q) = potentials::harnack(domain, state, params)?;
        Some(min_max(&q).1)
    } else {
        None
    };

    Ok(DiagnosticsRecord {
        t: state.t,
        volume,
        r,
        min_r,
        max_r,
        entropy,
        max_q,
        residual_r: latest_residual,
        msq_integral,
    })
}

/// Central difference on a possibly non-uniform three-point stencil.
fn central_dt(f0: f64, f1: f64, f2: f64, h0: f64, h1: f64) -> f64 {
    (h0 * h0 * f2 - h1 * h1 * f0 - (h0 * h0 - h1 * h1) * f1) / (h0 * h1 * (h0 + h1))
}

fn residual_sample(
    domain: &SurfaceDomain,
    prev: &ConformalState,
    mid: &ConformalState,
    next: &ConformalState,
    params: &FlowParams,
) -> ResidualSample {
    let a = params.alpha_prime;
    let h0 = mid.t - prev.t;
    let h1 = next.t - mid.t;

    let r_prev = scalar_curvature(domain, prev);
    let r_mid = scalar_curvature(domain, mid);
    let r_next = scalar_curvature(domain, next);
    let p_mid = reaction(&r_mid, a);
    let r_norm_prev = normalization_r_from(domain, prev, &r_prev, a);
    let r_norm_mid = normalization_r_from(domain, mid, &r_mid, a);
    let r_norm_next = normalization_r_from(domain, next, &r_next, a);

    let lap_r = laplacian_conformal(domain, mid, &r_mid);
    let grad_r_sq = gradient_sq_conformal(domain, mid, &r_mid);

    // d/dt R = (1 + a'R/2) lap R + a'/2 |grad R|^2 + R (p - r).
    let mut scalar = 0.0_f64;
    for i in 0..r_mid.len() {
        let dr_dt = central_dt(r_prev[i], r_mid[i], r_next[i], h0, h1);
        let rhs = (1.0 + a * r_mid[i] / 2.0) * lap_r[i]
            + a / 2.0 * grad_r_sq[i]
            + r_mid[i] * (p_mid[i] - r_norm_mid);
        scalar = scalar.max((dr_dt - rhs).abs());
    }

    // d/dt R^2 = (1 + a'R/2) lap(R^2) - 2 |grad R|^2 + 2 R^2 (p - r).
    let r_sq_mid: Vec<f64> = r_mid.iter().map(|&v| v * v).collect();
    let lap_r_sq = laplacian_conformal(domain, mid, &r_sq_mid);
    let mut scalar_sq = 0.0_f64;
    for i in 0..r_mid.len() {
        let d_dt = central_dt(
            r_prev[i] * r_prev[i],
            r_sq_mid[i],
            r_next[i] * r_next[i],
            h0,
            h1,
        );
        let rhs = (1.0 + a * r_mid[i] / 2.0) * lap_r_sq[i] - 2.0 * grad_r_sq[i]
            + 2.0 * r_sq_mid[i] * (p_mid[i] - r_norm_mid);
        scalar_sq = scalar_sq.max((d_dt - rhs).abs());
    }

    // d/dt |grad R|^2 needs |Hess R|^2; only the torus forms Hessians.
    let grad_sq = if domain.kind() == SurfaceKind::FlatTorus {
        let g_prev = gradient_sq_conformal(domain, prev, &r_prev);
        let g_next = gradient_sq_conformal(domain, next, &r_next);
        let lap_g = laplacian_conformal(domain, mid, &grad_r_sq);
        let grad_g_dot_grad_r = gradient_inner_conformal(domain, mid, &grad_r_sq, &r_mid);
        let hess_sq = crate::curvature::conformal_hessian_sq(domain, mid, &r_mid)
            .expect("torus hessian");
        let mut worst = 0.0_f64;
        for i in 0..r_mid.len() {
            let d_dt = central_dt(g_prev[i], grad_r_sq[i], g_next[i], h0, h1);
            let coef = 1.0 + a * r_mid[i] / 2.0;
            let rhs = coef * lap_g[i] - 2.0 * coef * hess_sq[i]
                + a * grad_g_dot_grad_r[i]
                + (4.0 * r_mid[i] - 3.0 * r_norm_mid
                    + 1.25 * a * r_mid[i] * r_mid[i]
                    + a * lap_r[i])
                    * grad_r_sq[i];
            worst = worst.max((d_dt - rhs).abs());
        }
        Some(worst)
    } else {
        None
    };

    // d/dt r = a'/(4 Vol) ( -2 int (1 + a'R/2)|grad R|^2
    //                       + int (R^3 + a'/4 R^4) - r int R^2 ).
    let vol = domain.volume(&mid.u);
    let weighted_grad: Vec<f64> = grad_r_sq
        .iter()
        .zip(&r_mid)
        .map(|(&g, &r)| (1.0 + a * r / 2.0) * g)
        .collect();
    let cubic: Vec<f64> = r_mid
        .iter()
        .map(|&r| r * r * r + a / 4.0 * r * r * r * r)
        .collect();
    let r_sq_int = domain.integrate(&r_sq_mid, &mid.u);
    let rhs_r = a / (4.0 * vol)
        * (-2.0 * domain.integrate(&weighted_grad, &mid.u) + domain.integrate(&cubic, &mid.u)
            - r_norm_mid * r_sq_int);
    let normalization = (central_dt(r_norm_prev, r_norm_mid, r_norm_next, h0, h1) - rhs_r).abs();

    ResidualSample {
        t: mid.t,
        scalar,
        scalar_sq,
        grad_sq,
        normalization,
    }
}

/// Integrate from `t = 0` to `params.t_end`, sampling every
/// `params.sample_stride` steps (plus the initial and final states) and
/// evaluating the evolution-identity residuals every
/// `params.residual_check_stride` steps on consecutive step triples.
/// `ConeExit` and `StepUnderflow` terminate cleanly with the trajectory
/// collected so far.
pub fn run(domain: &Arc<SurfaceDomain>, initial_u: Vec<f64>, params: &FlowParams) -> Result<Trajectory> {
    params.validate()?;
    let state0 = ConformalState::new(initial_u, 0.0)?;
    let mut traj = Trajectory {
        domain: Arc::clone(domain),
        params: *params,
        samples: Vec::new(),
        sample_stride: params.sample_stride,
        termination: Termination::Completed,
        final_time: 0.0,
        residual_checks: Vec::new(),
    };
    if crate::curvature::cone_classify(domain, &state0, params) != Cone::AllPlus {
        traj.termination = Termination::ConeExit;
        return Ok(traj);
    }

    let mut warm = WarmStarts { f: None, w: None };
    let mut latest_residual = None;
    let rec = sample_diagnostics(domain, &state0, params, &mut warm, latest_residual)?;
    traj.samples.push((state0.clone(), rec));

    let mut state = state0.clone();
    let mut step_index: usize = 0;
    // Rolling window of the last 2*spacing + 1 states (step-indexed), used
    // for the residual central differences.
    let spacing = RESIDUAL_FD_SPACING;
    let mut history: std::collections::VecDeque<ConformalState> =
        std::collections::VecDeque::with_capacity(2 * spacing + 1);
    history.push_back(state0);

    while state.t < params.t_end - 1e-13 {
        let next = match step_adaptive(domain, &state, params, Some(params.t_end - state.t)) {
            Ok(next) => next,
            Err(Error::ConeExit { .. }) => {
                traj.termination = Termination::ConeExit;
                break;
            }
            Err(Error::StepUnderflow { .. }) => {
                traj.termination = Termination::StepUnderflow;
                break;
            }
            Err(e) => return Err(e),
        };
        step_index += 1;

        history.push_back(next.clone());
        if history.len() > 2 * spacing + 1 {
            history.pop_front();
        }
        // Residuals at the middle of the window, on the check cadence.
        if history.len() == 2 * spacing + 1 {
            let middle_step = step_index - spacing;
            if middle_step % params.residual_check_stride == 0 {
                let sample = residual_sample(
                    domain,
                    &history[0],
                    &history[spacing],
                    &history[2 * spacing],
                    params,
                );
                latest_residual = Some(sample.scalar);
                traj.residual_checks.push(sample);
            }
        }

        state = next;
        if step_index % params.sample_stride == 0 {
            let rec = sample_diagnostics(domain, &state, params, &mut warm, latest_residual)?;
            traj.samples.push((state.clone(), rec));
        }
    }

    let last_t = traj.samples.last().map(|(s, _)| s.t).unwrap_or(-1.0);
    if state.t > last_t {
        let rec = sample_diagnostics(domain, &state, params, &mut warm, latest_residual)?;
        traj.samples.push((state.clone(), rec));
    }
    traj.final_time = state.t;
    Ok(traj)
}

/// Comparison value for the maximum of R together with the closed-form
/// `R^2` envelope at the same time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AbelBound {
    pub y: f64,
    pub y_sq_bound: f64,
}

/// Solution of the Abel comparison ODE sampled at the input times.
#[derive(Debug, Clone)]
pub struct AbelSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when |y| exceeded 1e12; `times`/`values` stop there.
    pub blow_up_time: Option<f64>,
}

/// Co-integrate `y' = -r(t) y + y^2 + a'/4 y^3` (the Abel equation of the
/// first kind) along recorded `r(t)` samples, one RK4 step per interval with
/// linear interpolation of `r`. With `y0 = max R(., 0)` the solution is an
/// upper envelope for `max R` by the maximum principle.
pub fn abel_comparison(r_series: &[(f64, f64)], y0: f64, params: &FlowParams) -> AbelSolution {
    let a = params.alpha_prime;
    let f = |y: f64, r: f64| -r * y + y * y + a / 4.0 * y * y * y;
    let mut times = Vec::with_capacity(r_series.len());
    let mut values = Vec::with_capacity(r_series.len());
    let mut blow_up_time = None;

    if r_series.is_empty() {
        return AbelSolution {
            times,
            values,
            blow_up_time,
        };
    }
    let mut y = y0;
    times.push(r_series[0].0);
    values.push(y);
    for win in r_series.windows(2) {
        let (t0, r0) = win[0];
        let (t1, r1) = win[1];
        let h = t1 - t0;
        let r_mid = 0.5 * (r0 + r1);
        let k1 = f(y, r0);
        let k2 = f(y + 0.5 * h * k1, r_mid);
        let k3 = f(y + 0.5 * h * k2, r_mid);
        let k4 = f(y + h * k3, r1);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y.is_finite() || y.abs() > ABEL_BLOW_UP_LIMIT {
            blow_up_time = Some(t1);
            break;
        }
        times.push(t1);
        values.push(y);
    }
    AbelSolution {
        times,
        values,
        blow_up_time,
    }
}

/// Evaluate both maximum-principle companions along a trajectory: the Abel
/// comparison value seeded at `max R(., 0)` and the closed-form `R^2`
/// envelope, per sample, for as long as each is alive.
pub fn abel_bounds(traj: &Trajectory) -> Vec<(f64, AbelBound)> {
    let Some((_, first)) = traj.samples.first() else {
        return Vec::new();
    };
    let abel = abel_comparison(&traj.r_series(), first.max_r, &traj.params);
    let volume = first.volume;
    let r0_sq = first.max_r.abs().max(first.min_r.abs()).powi(2);
    let mut out = Vec::new();
    for (i, &t) in abel.times.iter().enumerate() {
        let Ok(y_sq_bound) = r_squared_bound(t, r0_sq, &traj.domain, volume, &traj.params) else {
            break;
        };
        out.push((
            t,
            AbelBound {
                y: abel.values[i],
                y_sq_bound,
            },
        ));
    }
    out
}

/// Closed-form envelope for `max R^2` from the maximum principle:
/// `B(t) = R0^2 c1 e^{c1 t} / (c1 - c2 R0^2 (e^{c1 t} - 1))` with
/// `c1 = 1 - 4 pi chi / Vol`, `c2 = 1 + a'/2`. The envelope is valid while
/// the denominator keeps the sign of `c1` (for `chi > 0` and large volume
/// `c1` is negative and the denominator starts negative); expiry is
/// reported as an error. `volume` is the conserved area of the run.
pub fn r_squared_bound(
    t: f64,
    r0_sq: f64,
    domain: &SurfaceDomain,
    volume: f64,
    params: &FlowParams,
) -> Result<f64> {
    let chi = domain.euler_characteristic() as f64;
    let c1 = 1.0 - 4.0 * std::f64::consts::PI * chi / volume;
    let c2 = 1.0 + params.alpha_prime / 2.0;
    if c1.abs() < 1e-12 {
        // c1 -> 0 limit: z' = c2 z^2.
        let denom = 1.0 - c2 * r0_sq * t;
        if denom <= 0.0 {
            return Err(Error::EnvelopeExpired { t });
        }
        return Ok(r0_sq / denom);
    }
    let e = (c1 * t).exp();
    let denom = c1 - c2 * r0_sq * (e - 1.0);
    if denom / c1 <= 0.0 {
        return Err(Error::EnvelopeExpired { t });
    }
    Ok(r0_sq * c1 * e / denom)
}
