//! Acceptance suite: every top-level claim the solver must satisfy, at
//! desk scale (torus 64^2, sphere subdivisions 4, t_end = 1), one test per
//! criterion with a printed pass/fail line.

use rgflow::curvature::{ConformalState, FlowParams};
use rgflow::validation::{self, BatteryScenarios, CheckResult, CheckStatus};
use rgflow::{flow, SurfaceDomain};
use std::sync::{Arc, OnceLock};

fn base_params() -> FlowParams {
    FlowParams {
        t_end: 1.0,
        ..FlowParams::default()
    }
}

/// Shared scenario trajectories, built once for the whole suite.
fn scenarios() -> &'static BatteryScenarios {
    static CTX: OnceLock<BatteryScenarios> = OnceLock::new();
    CTX.get_or_init(|| BatteryScenarios::build(&base_params()).expect("scenario build"))
}

fn report(criterion: &str, results: &[CheckResult]) {
    let mut failed = Vec::new();
    for r in results {
        let mark = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!(
            "acceptance {criterion}: {mark} {} (measured {:.4e}, threshold {:.3e}) {}",
            r.name, r.measured, r.threshold, r.context
        );
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    assert!(failed.is_empty(), "{criterion} failed: {failed:?}");
}

#[test]
fn criterion_01_fixed_points() {
    // Flat torus and round spheres (radius 1 and 2) stay put to 1e-8 over
    // t_end = 1 for alpha' in {0, 0.5, 1}.
    let results = validation::check_fixed_points(&base_params());
    assert_eq!(results.len(), 9);
    report("01-fixed-points", &results);
}

#[test]
fn criterion_02_volume_conservation() {
    let sc = scenarios();
    let results = vec![
        validation::check_volume_conservation(&sc.torus_perturbed),
        validation::check_volume_conservation(&sc.sphere_perturbed),
    ];
    for r in &results {
        assert_eq!(r.threshold, 1e-6);
        assert!(r.status != CheckStatus::Skipped);
    }
    report("02-volume", &results);
}

#[test]
fn criterion_03_gauss_bonnet_in_time() {
    let sc = scenarios();
    let results = vec![
        validation::check_gauss_bonnet(&sc.torus_perturbed),
        validation::check_gauss_bonnet(&sc.sphere_perturbed),
    ];
    report("03-gauss-bonnet", &results);
}

#[test]
fn criterion_04_evolution_identity_residuals() {
    let sc = scenarios();
    let mut results = validation::check_evolution_residuals(&sc.residual_default, Some(1e-3));
    assert!(
        results
            .iter()
            .filter(|r| r.status != CheckStatus::Skipped)
            .count()
            >= 4,
        "all four identity families must be graded on the torus"
    );
    results.extend(validation::check_residual_convergence(
        &sc.residual_default,
        &sc.residual_refined,
    ));
    report("04-residuals", &results);
}

#[test]
fn criterion_05_entropy_monotonicity_and_dissipation() {
    let sc = scenarios();
    let monotone = validation::check_entropy_monotone(&sc.sphere_perturbed);
    assert!(
        monotone.status != CheckStatus::Skipped,
        "scenario must keep min R above the floor: {}",
        monotone.context
    );
    // Strict decrease must actually be exercised: the soliton residual is
    // well above the 1e-8 strictness trigger on this run.
    assert!(
        sc.sphere_perturbed
            .samples
            .iter()
            .filter(|(_, d)| d.msq_integral > 1e-8)
            .count()
            > 10,
        "perturbation too weak to test strict decrease"
    );
    let mut results = vec![monotone];
    results.extend(validation::check_entropy_dissipation(&sc.sphere_perturbed));
    report("05-entropy", &results);
}

#[test]
fn criterion_06_maximum_principle_bounds() {
    let sc = scenarios();
    let mut results = validation::check_bounds(&sc.torus_perturbed);
    results.extend(validation::check_bounds(&sc.sphere_perturbed));
    report("06-bounds", &results);
}

#[test]
fn criterion_07_ricci_limit() {
    let result = validation::check_ricci_limit(&base_params());
    assert_eq!(result.threshold, 0.6);
    report("07-ricci-limit", &[result]);
}

#[test]
fn criterion_08_torus_potential_estimates() {
    let sc = scenarios();
    let results = validation::check_torus_w_estimates(&sc.torus_perturbed);
    assert_eq!(results.len(), 3, "both inequalities plus monotonicity");
    // This scenario must exercise the estimates nontrivially.
    assert!(
        !results[0].context.contains("trivially"),
        "perturbed run should not degenerate: {}",
        results[0].context
    );
    report("08-torus-w", &results);
}

#[test]
fn criterion_09_harnack_relation() {
    let sc = scenarios();
    let result = validation::check_harnack_relation(&sc.sphere_harnack);
    assert_eq!(result.threshold, 1e-3);
    assert!(result.status != CheckStatus::Skipped, "{}", result.context);
    report("09-harnack", &[result]);
}

#[test]
fn criterion_10_oracle_equivalence() {
    // Poisson solves reproduce analytic eigenfunction inversions and the
    // RK4 step passes the Richardson order check.
    let mut results = Vec::new();

    let torus = SurfaceDomain::build_torus(64, 64, 1.0, 1.0).unwrap();
    let state = ConformalState::flat(&torus);
    let mode: Vec<f64> = torus
        .positions()
        .iter()
        .map(|p| (2.0 * std::f64::consts::PI * 3.0 * p[0]).sin())
        .collect();
    let phi = rgflow::potentials::solve_poisson(&torus, &state, &mode).unwrap();
    let lambda = -(2.0 * std::f64::consts::PI * 3.0).powi(2);
    let mut worst = 0.0_f64;
    for (v, m) in phi.iter().zip(&mode) {
        worst = worst.max((v - m / lambda).abs());
    }
    results.push(CheckResult {
        name: "oracle/torus_fourier_inversion".into(),
        status: if worst <= 1e-12 { CheckStatus::Pass } else { CheckStatus::Fail },
        measured: worst,
        threshold: 1e-12,
        context: "mode (3, 0)".into(),
    });

    let sphere = SurfaceDomain::build_sphere(4, 1.0).unwrap();
    let state = ConformalState::flat(&sphere);
    let z: Vec<f64> = sphere.positions().iter().map(|p| p[2]).collect();
    let phi = rgflow::potentials::solve_poisson(&sphere, &state, &z).unwrap();
    let mut worst = 0.0_f64;
    for (v, zi) in phi.iter().zip(&z) {
        worst = worst.max((v + zi / 2.0).abs());
    }
    results.push(CheckResult {
        name: "oracle/sphere_first_harmonic".into(),
        status: if worst <= 0.01 { CheckStatus::Pass } else { CheckStatus::Fail },
        measured: worst,
        threshold: 0.01,
        context: "laplacian(-z/2) = z on the unit sphere".into(),
    });

    // Richardson step halving: (one step) vs (two half steps), order >= 4.
    // Measured on a coarse grid with a deliberately large step so the dt^5
    // truncation term sits far above roundoff (at desk resolution the CFL
    // step is so small that one-step errors vanish into machine epsilon).
    let domain = Arc::new(SurfaceDomain::build_torus(16, 16, 1.0, 1.0).unwrap());
    let params = FlowParams {
        alpha_prime: 0.1,
        ..base_params()
    };
    let u0 = validation::sinusoid_torus(&domain, 0.1);
    let state = ConformalState::new(u0, 0.0).unwrap();
    let dt0 = 4.0 * flow::propose_dt(&domain, &state, &params).unwrap();
    let richardson = |dt: f64| {
        let full = flow::step_with_dt(&domain, &state, &params, dt).unwrap();
        let half = flow::step_with_dt(&domain, &state, &params, dt / 2.0).unwrap();
        let half2 = flow::step_with_dt(&domain, &half, &params, dt / 2.0).unwrap();
        full.u
            .iter()
            .zip(&half2.u)
            .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()))
    };
    let e1 = richardson(dt0);
    let e2 = richardson(dt0 / 2.0);
    let order = (e1 / e2).log2();
    results.push(CheckResult {
        name: "oracle/rk4_richardson_order".into(),
        status: if order >= 4.0 { CheckStatus::Pass } else { CheckStatus::Fail },
        // measured <= threshold convention: store the deficit below 4.
        measured: 4.0 - order,
        threshold: 0.0,
        context: format!("order {order:.2} (e1 {e1:.2e}, e2 {e2:.2e})"),
    });

    report("10-oracles", &results);
}
