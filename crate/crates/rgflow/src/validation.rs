//! Cross-cutting oracle battery: fixed points, limit comparisons,
//! evolution-identity residuals, maximum-principle bounds and entropy
//! monotonicity, runnable as one deterministic suite over canned scenarios.
//!
//! Identical configuration produces bitwise-identical results: scenarios
//! are seeded, run order is fixed, and concurrent scenario execution only
//! fills preassigned slots.

use crate::curvature::{scalar_curvature, ConformalState, FlowParams};
use crate::error::Result;
use crate::flow::{self, Termination, Trajectory};
use crate::potentials;
use crate::surface::{SurfaceDomain, SurfaceKind};
use crate::util::{linf_diff, min_max};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One verdict: `Pass` iff `measured <= threshold`; `Skipped` carries the
/// reason in `context`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub measured: f64,
    pub threshold: f64,
    pub context: String,
}

impl CheckResult {
    fn graded(name: impl Into<String>, measured: f64, threshold: f64, context: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: if measured <= threshold {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            measured,
            threshold,
            context: context.into(),
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Skipped,
            measured: 0.0,
            threshold: 0.0,
            context: reason.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// Battery output with coarse timing, serializable as the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryReport {
    pub results: Vec<CheckResult>,
    pub wall_seconds: f64,
}

impl BatteryReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed())
    }
}

// Scenario amplitudes. The sphere pointwise checks keep small amplitudes:
// the cotangent Laplacian has a non-vanishing pointwise defect at the 12
// valence-5 vertices, and the surviving residual scales with amplitude^2
// (the first-order part cancels against the discrete curvature).
const TORUS_N: usize = 64;
const SPHERE_SUBDIV: u32 = 4;
const TORUS_PERTURB_AMPLITUDE: f64 = 0.05;
const SPHERE_PERTURB_AMPLITUDE: f64 = 0.05;
const HARNACK_AMPLITUDE: f64 = 0.003;
const RESIDUAL_AMPLITUDE: f64 = 0.003;

/// Interpolating an analytic ansatz onto the mesh leaves mesh-scale
/// components in the discrete eigenbasis; their fast decay pollutes early
/// central differences in time. Sphere scenarios therefore start from a
/// short pre-integrated state.
const SPHERE_BURN_IN: f64 = 0.1;

fn burn_in(domain: &Arc<SurfaceDomain>, u0: Vec<f64>, params: &FlowParams, horizon: f64) -> Result<Vec<f64>> {
    let prep = FlowParams {
        t_end: horizon,
        sample_stride: 1_000_000,
        residual_check_stride: 1_000_000,
        ..*params
    };
    let traj = flow::run(domain, u0, &prep)?;
    Ok(traj
        .samples
        .last()
        .map(|(s, _)| s.u.clone())
        .unwrap_or_else(|| vec![0.0; domain.node_count()]))
}

pub fn sinusoid_torus(domain: &SurfaceDomain, amplitude: f64) -> Vec<f64> {
    domain
        .positions()
        .iter()
        .map(|p| amplitude * (2.0 * std::f64::consts::PI * p[0]).sin())
        .collect()
}

/// Zonal second-harmonic bump; keeps R positive for small amplitudes.
pub fn zonal_sphere(domain: &SurfaceDomain, amplitude: f64) -> Vec<f64> {
    domain
        .positions()
        .iter()
        .map(|p| {
            let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            let z = p[2] / norm;
            amplitude * 0.5 * (3.0 * z * z - 1.0)
        })
        .collect()
}

/// Fixed-point preservation: flat torus and round spheres (radius 1 and 2)
/// integrated to `t_end`, one result per (domain, alpha') pair.
pub fn check_fixed_points(params: &FlowParams) -> Vec<CheckResult> {
    let alphas = [0.0, 0.5, 1.0];
    let domains: Vec<(&str, Arc<SurfaceDomain>)> = vec![
        (
            "torus",
            Arc::new(SurfaceDomain::build_torus(TORUS_N, TORUS_N, 1.0, 1.0).expect("torus")),
        ),
        (
            "sphere_r1",
            Arc::new(SurfaceDomain::build_sphere(SPHERE_SUBDIV, 1.0).expect("sphere")),
        ),
        (
            "sphere_r2",
            Arc::new(SurfaceDomain::build_sphere(SPHERE_SUBDIV, 2.0).expect("sphere")),
        ),
    ];

    let jobs: Vec<(String, Arc<SurfaceDomain>, f64)> = domains
        .iter()
        .flat_map(|(label, domain)| {
            alphas
                .iter()
                .map(move |&alpha| (format!("fixed_point/{label}/alpha_{alpha}"), Arc::clone(domain), alpha))
        })
        .collect();

    let mut results: Vec<Option<CheckResult>> = (0..jobs.len()).map(|_| None).collect();
    let outcomes: Vec<(usize, CheckResult)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .enumerate()
            .map(|(slot, (name, domain, alpha))| {
                let prm = FlowParams {
                    alpha_prime: alpha,
                    sample_stride: 400,
                    ..*params
                };
                scope.spawn(move || {
                    let traj = flow::run(&domain, vec![0.0; domain.node_count()], &prm);
                    let result = match traj {
                        Ok(traj) if traj.termination == Termination::Completed => {
                            let drift = traj
                                .samples
                                .last()
                                .map(|(s, _)| crate::util::linf(&s.u))
                                .unwrap_or(f64::INFINITY);
                            CheckResult::graded(&name, drift, 1e-8, format!("t_end={}", prm.t_end))
                        }
                        Ok(traj) => CheckResult::graded(
                            &name,
                            f64::INFINITY,
                            1e-8,
                            format!("terminated early: {}", traj.termination.label()),
                        ),
                        Err(e) => CheckResult::graded(&name, f64::INFINITY, 1e-8, format!("error: {e}")),
                    };
                    (slot, result)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
    });
    for (slot, result) in outcomes {
        results[slot] = Some(result);
    }
    results.into_iter().map(|r| r.expect("slot filled")).collect()
}

/// Sup-norm distance between trajectories, comparing each sample of `a`
/// against the linear-in-time interpolation of `reference`.
pub fn trajectory_distance(a: &Trajectory, reference: &Trajectory) -> f64 {
    let ref_samples = &reference.samples;
    let mut worst = 0.0_f64;
    for (state, _) in &a.samples {
        let t = state.t;
        let idx = ref_samples.partition_point(|(s, _)| s.t <= t);
        let interp: Vec<f64> = if idx == 0 {
            ref_samples[0].0.u.clone()
        } else if idx >= ref_samples.len() {
            ref_samples.last().unwrap().0.u.clone()
        } else {
            let (s0, _) = &ref_samples[idx - 1];
            let (s1, _) = &ref_samples[idx];
            let lam = (t - s0.t) / (s1.t - s0.t);
            s0.u.iter().zip(&s1.u).map(|(&a, &b)| a + lam * (b - a)).collect()
        };
        worst = worst.max(linf_diff(&state.u, &interp));
    }
    worst
}

/// In the a' -> 0 limit the flow reduces to the normalized Ricci flow;
/// trajectory distance to the a' = 0 run must decay at least linearly
/// under coupling halving (ratio <= 0.6 across {0.2, 0.1, 0.05}).
pub fn check_ricci_limit(params: &FlowParams) -> CheckResult {
    let domain = Arc::new(SurfaceDomain::build_sphere(SPHERE_SUBDIV, 1.0).expect("sphere"));
    let u0 = zonal_sphere(&domain, SPHERE_PERTURB_AMPLITUDE);
    let horizon = FlowParams {
        t_end: 0.5_f64.min(params.t_end),
        sample_stride: 5,
        ..*params
    };

    let run_at = |alpha: f64| -> Result<Trajectory> {
        let prm = FlowParams {
            alpha_prime: alpha,
            ..horizon
        };
        flow::run(&domain, u0.clone(), &prm)
    };

    let reference = match run_at(0.0) {
        Ok(t) => t,
        Err(e) => return CheckResult::graded("ricci_limit", f64::INFINITY, 0.6, format!("error: {e}")),
    };
    let mut distances = Vec::new();
    for alpha in [0.2, 0.1, 0.05] {
        match run_at(alpha) {
            Ok(t) => distances.push(trajectory_distance(&t, &reference)),
            Err(e) => {
                return CheckResult::graded("ricci_limit", f64::INFINITY, 0.6, format!("error: {e}"))
            }
        }
    }
    let r1 = distances[1] / distances[0];
    let r2 = distances[2] / distances[1];
    CheckResult::graded(
        "ricci_limit",
        r1.max(r2),
        0.6,
        format!(
            "d(0.2)={:.3e} d(0.1)={:.3e} d(0.05)={:.3e} ratios {:.3}/{:.3}",
            distances[0], distances[1], distances[2], r1, r2
        ),
    )
}

/// Resolution-coupled residual threshold: `C1 dt^2 + C2 h^2`, constants
/// calibrated on the torus where spectral accuracy isolates the dt error.
/// A fixed absolute threshold would mask regressions at high resolution.
pub fn residual_threshold(domain: &SurfaceDomain, params: &FlowParams) -> f64 {
    const C1: f64 = 1e7;
    const C2: f64 = 0.1;
    let dt = params.dt_safety * 2.0 / domain.lambda_max_abs();
    let h_sq = match domain.kind() {
        // Spectral in space: no h^2 term.
        SurfaceKind::FlatTorus => 0.0,
        SurfaceKind::RoundSphere => 4.0 / domain.lambda_max_abs(),
    };
    C1 * dt * dt + C2 * h_sq
}

type ResidualExtract = fn(&crate::flow::ResidualSample) -> Option<f64>;

const RESIDUAL_FAMILIES: [(&str, ResidualExtract); 4] = [
    ("scalar", |s| Some(s.scalar)),
    ("scalar_sq", |s| Some(s.scalar_sq)),
    ("grad_sq", |s| s.grad_sq),
    ("normalization", |s| Some(s.normalization)),
];

fn residual_sup(traj: &Trajectory, extract: ResidualExtract) -> Option<f64> {
    traj.residual_checks
        .iter()
        .filter_map(extract)
        .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

/// Grade the evolution-identity residuals recorded along a trajectory.
/// Pass a fixed threshold (1e-3 at the desk-scale defaults) or `None` for
/// the resolution-coupled formula.
pub fn check_evolution_residuals(traj: &Trajectory, threshold: Option<f64>) -> Vec<CheckResult> {
    let kind = traj.domain.kind().label();
    if traj.residual_checks.is_empty() {
        return vec![CheckResult::skipped(
            format!("residual/{kind}"),
            "no residual checkpoints recorded (run shorter than the stride)",
        )];
    }
    let threshold = threshold.unwrap_or_else(|| residual_threshold(&traj.domain, &traj.params));
    let mut out = Vec::new();
    for (name, extract) in RESIDUAL_FAMILIES {
        let full = format!("residual/{kind}/{name}");
        match residual_sup(traj, extract) {
            Some(v) => out.push(CheckResult::graded(
                full,
                v,
                threshold,
                format!("{} checkpoints", traj.residual_checks.len()),
            )),
            None => out.push(CheckResult::skipped(
                full,
                "family needs pointwise Hessians (torus only)",
            )),
        }
    }
    out
}

/// Convergence sub-check: residual sups must shrink at least 3x when dt and
/// h are simultaneously halved.
pub fn check_residual_convergence(default_run: &Trajectory, refined: &Trajectory) -> Vec<CheckResult> {
    RESIDUAL_FAMILIES
        .iter()
        .map(|&(name, extract)| {
            let full = format!("residual_convergence/{name}");
            match (residual_sup(default_run, extract), residual_sup(refined, extract)) {
                (Some(coarse), Some(fine)) if coarse > 0.0 => CheckResult::graded(
                    full,
                    fine / coarse,
                    1.0 / 3.0,
                    format!("coarse {coarse:.3e} -> fine {fine:.3e}"),
                ),
                (Some(_), Some(_)) => CheckResult::skipped(full, "coarse residual is zero"),
                _ => CheckResult::skipped(full, "family unavailable on this domain"),
            }
        })
        .collect()
}

/// The three bound families along a trajectory: the Abel comparison
/// envelope for max R, the closed-form envelope for max R^2, and the two
/// lower bounds on the normalization r. All one-sided with tolerance 1e-4.
pub fn check_bounds(traj: &Trajectory) -> Vec<CheckResult> {
    const TOL: f64 = 1e-4;
    let kind = traj.domain.kind().label();
    let mut out = Vec::new();
    if traj.samples.is_empty() {
        return vec![CheckResult::skipped(format!("bounds/{kind}"), "empty trajectory")];
    }

    // Abel comparison for max R.
    let y0 = traj.samples[0].1.max_r;
    let abel = flow::abel_comparison(&traj.r_series(), y0, &traj.params);
    let mut worst_abel = f64::NEG_INFINITY;
    for (i, &t) in abel.times.iter().enumerate() {
        let rec = &traj.samples[i].1;
        debug_assert!((rec.t - t).abs() < 1e-12);
        worst_abel = worst_abel.max(rec.max_r - abel.values[i]);
    }
    out.push(CheckResult::graded(
        format!("bounds/{kind}/abel_max_r"),
        worst_abel,
        TOL,
        match abel.blow_up_time {
            Some(t) => format!("comparison blew up at t={t:.3}; checked while it existed"),
            None => format!("{} samples", abel.times.len()),
        },
    ));

    // Closed-form envelope for max R^2 while it is valid.
    let volume = traj.samples[0].1.volume;
    let r0_sq = traj.samples[0]
        .1
        .max_r
        .abs()
        .max(traj.samples[0].1.min_r.abs())
        .powi(2);
    let mut worst_env = f64::NEG_INFINITY;
    let mut env_checked = 0;
    for (_, rec) in &traj.samples {
        match flow::r_squared_bound(rec.t, r0_sq, &traj.domain, volume, &traj.params) {
            Ok(bound) => {
                let max_r_sq = rec.max_r.abs().max(rec.min_r.abs()).powi(2);
                worst_env = worst_env.max(max_r_sq - bound);
                env_checked += 1;
            }
            Err(_) => break,
        }
    }
    if env_checked > 0 {
        out.push(CheckResult::graded(
            format!("bounds/{kind}/r_squared_envelope"),
            worst_env,
            TOL,
            format!("{env_checked} samples inside envelope validity"),
        ));
    } else {
        out.push(CheckResult::skipped(
            format!("bounds/{kind}/r_squared_envelope"),
            "envelope expired immediately",
        ));
    }

    // Lower bounds on r: r >= -1/a' and r >= 2 pi chi / Vol.
    let a = traj.params.alpha_prime;
    let chi = traj.domain.euler_characteristic() as f64;
    let mut worst_coupling = f64::NEG_INFINITY;
    let mut worst_topological = f64::NEG_INFINITY;
    for (_, rec) in &traj.samples {
        if a > 0.0 {
            worst_coupling = worst_coupling.max(-1.0 / a - rec.r);
        }
        worst_topological =
            worst_topological.max(2.0 * std::f64::consts::PI * chi / rec.volume - rec.r);
    }
    if a > 0.0 {
        out.push(CheckResult::graded(
            format!("bounds/{kind}/r_above_coupling"),
            worst_coupling,
            TOL,
            format!("-1/a' = {:.3}", -1.0 / a),
        ));
    } else {
        out.push(CheckResult::skipped(
            format!("bounds/{kind}/r_above_coupling"),
            "a' = 0: bound is vacuous",
        ));
    }
    out.push(CheckResult::graded(
        format!("bounds/{kind}/r_above_topological"),
        worst_topological,
        TOL,
        format!("2 pi chi = {:.3}", 2.0 * std::f64::consts::PI * chi),
    ));
    out
}

/// Entropy must be non-increasing sample to sample (within 1e-8), strictly
/// decreasing (margin 1e-10) while the soliton residual integral exceeds
/// 1e-8. Requires positive curvature throughout, otherwise `Skipped`.
pub fn check_entropy_monotone(traj: &Trajectory) -> CheckResult {
    let name = format!("entropy_monotone/{}", traj.domain.kind().label());
    let entropies: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .filter_map(|(_, d)| d.entropy.map(|n| (d.t, n, d.msq_integral)))
        .collect();
    if entropies.len() != traj.samples.len() || entropies.len() < 2 {
        return CheckResult::skipped(name, "min R dropped below the entropy floor (or too few samples)");
    }
    let mut worst_increase = f64::NEG_INFINITY;
    let mut strictness_violations = 0usize;
    for win in entropies.windows(2) {
        let (_, n0, msq) = win[0];
        let (_, n1, _) = win[1];
        worst_increase = worst_increase.max(n1 - n0);
        if msq > 1e-8 && n1 > n0 - 1e-10 {
            strictness_violations += 1;
        }
    }
    let mut result = CheckResult::graded(
        name,
        worst_increase,
        1e-8,
        format!(
            "{} samples, strictness violations: {strictness_violations}",
            entropies.len()
        ),
    );
    if strictness_violations > 0 {
        result.status = CheckStatus::Fail;
    }
    result
}

/// Entropy dissipation: the two analytic expressions agree to 1e-6
/// relative, and both match finite-difference dN/dt along the trajectory
/// to 1e-3 relative.
pub fn check_entropy_dissipation(traj: &Trajectory) -> Vec<CheckResult> {
    let kind = traj.domain.kind().label();
    let name_forms = format!("entropy_dissipation/{kind}/forms_agree");
    let name_fd = format!("entropy_dissipation/{kind}/matches_fd");
    if traj.samples.len() < 3 || traj.samples.iter().any(|(_, d)| d.entropy.is_none()) {
        let reason = "needs positive curvature and at least 3 samples";
        return vec![
            CheckResult::skipped(name_forms, reason),
            CheckResult::skipped(name_fd, reason),
        ];
    }
    let mut worst_forms = 0.0_f64;
    let mut worst_fd = 0.0_f64;
    for idx in 1..traj.samples.len() - 1 {
        let report = match potentials::entropy_dissipation_at_sample(traj, idx) {
            Ok(r) => r,
            Err(e) => {
                let reason = format!("dissipation unavailable: {e}");
                return vec![
                    CheckResult::skipped(name_forms, reason.clone()),
                    CheckResult::skipped(name_fd, reason),
                ];
            }
        };
        worst_forms = worst_forms.max(report.cross_check_rel);
        let fd = report.dn_dt_fd.expect("interior sample");
        let rel = (fd - report.dn_dt).abs() / report.dn_dt.abs().max(1e-300);
        worst_fd = worst_fd.max(rel);
    }
    vec![
        CheckResult::graded(name_forms, worst_forms, 1e-6, "max over interior samples"),
        CheckResult::graded(name_fd, worst_fd, 1e-3, "relative, max over interior samples"),
    ]
}

/// Differential Harnack relation `(1 + a'R/2) Q = dL/dt - |grad L|^2`
/// along a positive-curvature trajectory, sup-norm threshold 1e-3.
pub fn check_harnack_relation(traj: &Trajectory) -> CheckResult {
    let name = format!("harnack_relation/{}", traj.domain.kind().label());
    if traj.samples.len() < 3 {
        return CheckResult::skipped(name, "needs at least 3 samples");
    }
    let domain = &traj.domain;
    let params = &traj.params;
    let a = params.alpha_prime;

    let l_field = |state: &ConformalState| -> Option<Vec<f64>> {
        let r = scalar_curvature(domain, state);
        if min_max(&r).0 <= params.entropy_floor {
            return None;
        }
        Some(r.iter().map(|&ri| ri.ln() + a * ri / 2.0).collect())
    };

    let mut worst = 0.0_f64;
    for idx in 1..traj.samples.len() - 1 {
        let (state, _) = &traj.samples[idx];
        let (l_prev, l_mid, l_next) = match (
            l_field(&traj.samples[idx - 1].0),
            l_field(state),
            l_field(&traj.samples[idx + 1].0),
        ) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return CheckResult::skipped(name, "curvature dropped below the entropy floor"),
        };
        let (q, grad_l_sq) = match potentials::harnack(domain, state, params)
            .and_then(|(_, q)| potentials::harnack_l_gradient_sq(domain, state, params).map(|g| (q, g)))
        {
            Ok(pair) => pair,
            Err(e) => return CheckResult::skipped(name, format!("harnack unavailable: {e}")),
        };
        let r_field = scalar_curvature(domain, state);
        let h0 = traj.samples[idx].0.t - traj.samples[idx - 1].0.t;
        let h1 = traj.samples[idx + 1].0.t - traj.samples[idx].0.t;
        for i in 0..q.len() {
            let dl_dt = (h0 * h0 * l_next[i] - h1 * h1 * l_prev[i]
                - (h0 * h0 - h1 * h1) * l_mid[i])
                / (h0 * h1 * (h0 + h1));
            let lhs = (1.0 + a * r_field[i] / 2.0) * q[i];
            worst = worst.max((lhs - (dl_dt - grad_l_sq[i])).abs());
        }
    }
    CheckResult::graded(name, worst, 1e-3, "sup over interior samples and nodes")
}

/// Volume conservation along a run (the point of the normalization r).
pub fn check_volume_conservation(traj: &Trajectory) -> CheckResult {
    let name = format!("volume/{}", traj.domain.kind().label());
    if traj.samples.is_empty() {
        return CheckResult::skipped(name, "empty trajectory");
    }
    let v0 = traj.samples[0].1.volume;
    let worst = traj
        .samples
        .iter()
        .map(|(_, d)| (d.volume - v0).abs() / v0)
        .fold(0.0_f64, f64::max);
    CheckResult::graded(name, worst, 1e-6, format!("initial volume {v0:.6}"))
}

/// Gauss-Bonnet in time: `int R dmu` stays at `4 pi chi` to spectral
/// accuracy on the torus and within 1% of `8 pi` on the sphere mesh, and
/// is constant in time either way.
pub fn check_gauss_bonnet(traj: &Trajectory) -> CheckResult {
    let kind = traj.domain.kind();
    let name = format!("gauss_bonnet/{}", kind.label());
    if traj.samples.is_empty() {
        return CheckResult::skipped(name, "empty trajectory");
    }
    let expected = 4.0 * std::f64::consts::PI * traj.domain.euler_characteristic() as f64;
    let mut worst = 0.0_f64;
    let mut first_value = None;
    let mut worst_drift = 0.0_f64;
    for (state, _) in &traj.samples {
        let r_field = scalar_curvature(&traj.domain, state);
        let gb = traj.domain.integrate(&r_field, &state.u);
        worst = worst.max((gb - expected).abs());
        match first_value {
            None => first_value = Some(gb),
            Some(v0) => worst_drift = worst_drift.max((gb - v0).abs()),
        }
    }
    let threshold = match kind {
        SurfaceKind::FlatTorus => 1e-6,
        SurfaceKind::RoundSphere => 0.01 * 8.0 * std::f64::consts::PI,
    };
    let mut result = CheckResult::graded(
        name,
        worst,
        threshold,
        format!("drift in time {worst_drift:.3e}"),
    );
    if worst_drift > 1e-6 * expected.abs().max(1.0) {
        result.status = CheckStatus::Fail;
        result.context = format!("{} (drift exceeds 1e-6)", result.context);
    }
    result
}

/// The zero-Euler-characteristic gradient estimates as check results.
pub fn check_torus_w_estimates(traj: &Trajectory) -> Vec<CheckResult> {
    match potentials::torus_gradient_w_estimates(traj) {
        Ok(report) => {
            let to_status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };
            let context = if report.trivially_satisfied {
                "trivially satisfied (w vanishes identically)".to_string()
            } else {
                format!(
                    "max|grad w|^2: {:.3e} -> {:.3e}",
                    report.max_grad_w_sq.first().map(|&(_, v)| v).unwrap_or(0.0),
                    report.max_grad_w_sq.last().map(|&(_, v)| v).unwrap_or(0.0)
                )
            };
            vec![
                CheckResult {
                    name: "torus_w/quadratic_estimate".into(),
                    status: to_status(report.trivially_satisfied || report.quadratic_holds),
                    measured: 0.0,
                    threshold: 0.0,
                    context: context.clone(),
                },
                CheckResult {
                    name: "torus_w/log_estimate".into(),
                    status: to_status(report.trivially_satisfied || report.log_holds),
                    measured: 0.0,
                    threshold: 0.0,
                    context: context.clone(),
                },
                CheckResult {
                    name: "torus_w/max_grad_monotone".into(),
                    status: to_status(report.monotone),
                    measured: 0.0,
                    threshold: 0.0,
                    context,
                },
            ]
        }
        Err(e) => vec![CheckResult::skipped("torus_w", format!("unavailable: {e}"))],
    }
}

/// Random-field integration-by-parts spot check (seeded), exercising the
/// quadrature/operator pairing on both domains.
pub fn check_integration_by_parts(seed: u64) -> Vec<CheckResult> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (label, domain) in [
        ("torus", SurfaceDomain::build_torus(32, 32, 1.0, 1.0).expect("torus")),
        ("sphere", SurfaceDomain::build_sphere(3, 1.0).expect("sphere")),
    ] {
        // Band-limited random fields: white noise smoothed by two Poisson
        // solves (each solve damps mode k by 1/k^2).
        let n = domain.node_count();
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            a = domain.solve_poisson_background(&a).expect("smooth");
            b = domain.solve_poisson_background(&b).expect("smooth");
        }
        let lhs = domain.integrate_background(
            &domain
                .laplacian(&a)
                .iter()
                .zip(&b)
                .map(|(&la, &bv)| la * bv)
                .collect::<Vec<_>>(),
        );
        let rhs = -domain.integrate_background(&domain.gradient_inner(&a, &b));
        let scale = crate::util::linf(&a) * crate::util::linf(&b) * domain.lambda_max_abs();
        out.push(CheckResult::graded(
            format!("integration_by_parts/{label}"),
            (lhs - rhs).abs(),
            1e-8 * scale.max(1.0),
            format!("seed {seed}"),
        ));
    }
    out
}

/// Scenario runs shared by several checks.
pub struct BatteryScenarios {
    pub torus_perturbed: Trajectory,
    pub sphere_perturbed: Trajectory,
    pub sphere_harnack: Trajectory,
    pub residual_default: Trajectory,
    pub residual_refined: Trajectory,
}

impl BatteryScenarios {
    /// Build all scenario trajectories (the expensive part of the battery).
    pub fn build(base: &FlowParams) -> Result<Self> {
        let torus = Arc::new(SurfaceDomain::build_torus(TORUS_N, TORUS_N, 1.0, 1.0)?);
        let sphere = Arc::new(SurfaceDomain::build_sphere(SPHERE_SUBDIV, 1.0)?);
        let torus_refined = Arc::new(SurfaceDomain::build_torus(2 * TORUS_N, 2 * TORUS_N, 1.0, 1.0)?);

        let torus_params = FlowParams {
            alpha_prime: 0.1,
            sample_stride: 50,
            ..*base
        };
        let sphere_params = FlowParams {
            alpha_prime: 0.2,
            sample_stride: 5,
            ..*base
        };
        let harnack_params = FlowParams {
            alpha_prime: 0.2,
            t_end: 0.25_f64.min(base.t_end),
            sample_stride: 5,
            ..*base
        };
        let residual_params = FlowParams {
            alpha_prime: 0.1,
            t_end: 0.05_f64.min(base.t_end),
            sample_stride: 50,
            residual_check_stride: 25,
            ..*base
        };
        let refined_params = FlowParams {
            dt_safety: residual_params.dt_safety / 2.0,
            residual_check_stride: 100,
            ..residual_params
        };

        let (torus_perturbed, sphere_perturbed, sphere_harnack, residual_default, residual_refined) =
            std::thread::scope(|scope| {
                let t1 = scope.spawn(|| {
                    // The torus sinusoid is an exact discrete eigenmode, so
                    // no burn-in is needed there.
                    flow::run(&torus, sinusoid_torus(&torus, TORUS_PERTURB_AMPLITUDE), &torus_params)
                });
                let t2 = scope.spawn(|| {
                    let u0 = burn_in(
                        &sphere,
                        zonal_sphere(&sphere, SPHERE_PERTURB_AMPLITUDE),
                        &sphere_params,
                        SPHERE_BURN_IN,
                    )?;
                    flow::run(&sphere, u0, &sphere_params)
                });
                let t3 = scope.spawn(|| {
                    let u0 = burn_in(
                        &sphere,
                        zonal_sphere(&sphere, HARNACK_AMPLITUDE),
                        &harnack_params,
                        SPHERE_BURN_IN,
                    )?;
                    flow::run(&sphere, u0, &harnack_params)
                });
                let t4 = scope.spawn(|| {
                    flow::run(&torus, sinusoid_torus(&torus, RESIDUAL_AMPLITUDE), &residual_params)
                });
                let t5 = scope.spawn(|| {
                    flow::run(
                        &torus_refined,
                        sinusoid_torus(&torus_refined, RESIDUAL_AMPLITUDE),
                        &refined_params,
                    )
                });
                (
                    t1.join().expect("torus scenario"),
                    t2.join().expect("sphere scenario"),
                    t3.join().expect("harnack scenario"),
                    t4.join().expect("residual scenario"),
                    t5.join().expect("refined scenario"),
                )
            });
        Ok(BatteryScenarios {
            torus_perturbed: torus_perturbed?,
            sphere_perturbed: sphere_perturbed?,
            sphere_harnack: sphere_harnack?,
            residual_default: residual_default?,
            residual_refined: residual_refined?,
        })
    }
}

/// The full battery. `base.t_end` scales the long scenarios: the CLI uses
/// 0.5 to keep every scenario under a minute on commodity hardware, the
/// acceptance suite passes 1.0.
pub fn run_battery(base: &FlowParams, seed: u64) -> Result<BatteryReport> {
    let start = std::time::Instant::now();
    let mut results = Vec::new();

    results.extend(check_integration_by_parts(seed));
    results.extend(check_fixed_points(base));

    let scenarios = BatteryScenarios::build(base)?;
    results.push(check_volume_conservation(&scenarios.torus_perturbed));
    results.push(check_volume_conservation(&scenarios.sphere_perturbed));
    results.push(check_gauss_bonnet(&scenarios.torus_perturbed));
    results.push(check_gauss_bonnet(&scenarios.sphere_perturbed));
    results.extend(check_evolution_residuals(&scenarios.residual_default, Some(1e-3)));
    results.extend(check_residual_convergence(
        &scenarios.residual_default,
        &scenarios.residual_refined,
    ));
    results.extend(check_bounds(&scenarios.torus_perturbed));
    results.extend(check_bounds(&scenarios.sphere_perturbed));
    results.push(check_entropy_monotone(&scenarios.sphere_perturbed));
    results.extend(check_entropy_dissipation(&scenarios.sphere_perturbed));
    results.push(check_harnack_relation(&scenarios.sphere_harnack));
    results.extend(check_torus_w_estimates(&scenarios.torus_perturbed));
    results.push(check_ricci_limit(base));

    Ok(BatteryReport {
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
