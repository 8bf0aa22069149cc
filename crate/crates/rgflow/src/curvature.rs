//! Scalar curvature of the conformal metric, the normalization functional
//! and the parabolic-cone classification.
//!
//! The evolving metric is `g = exp(2u) h0`. In two dimensions the conformal
//! change of the scalar curvature is `R_g = exp(-2u) (R_h - 2 laplacian_h u)`
//! and the conformal operators are `laplacian_g = exp(-2u) laplacian_h`,
//! `|grad a|_g^2 = exp(-2u) |grad a|_h^2`.

use crate::error::{Error, Result};
use crate::surface::{SurfaceDomain, SurfaceKind};
use crate::util::{first_non_finite, min_max};
use serde::{Deserialize, Serialize};

/// Conformal factor field at a point in time; the full flow state.
#[derive(Debug, Clone)]
pub struct ConformalState {
    pub u: Vec<f64>,
    pub t: f64,
}

impl ConformalState {
    pub fn new(u: Vec<f64>, t: f64) -> Result<Self> {
        if let Some(i) = first_non_finite(&u) {
            return Err(Error::NonFiniteField { index: i });
        }
        Ok(ConformalState { u, t })
    }

    /// Flat start `u = 0` on the given domain.
    pub fn flat(domain: &SurfaceDomain) -> Self {
        ConformalState {
            u: vec![0.0; domain.node_count()],
            t: 0.0,
        }
    }
}

/// Coupling and run-control parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowParams {
    /// Coupling a' >= 0 of the second-order term.
    pub alpha_prime: f64,
    /// Fraction of the stability-limited step actually taken, in (0, 1].
    pub dt_safety: f64,
    /// Integration horizon.
    pub t_end: f64,
    /// Steps between stored trajectory samples.
    pub sample_stride: usize,
    /// Steps between on-the-fly evolution-identity residual checks.
    pub residual_check_stride: usize,
    /// States with min R at or below this are rejected from the
    /// entropy / Harnack paths instead of being clamped.
    pub entropy_floor: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            alpha_prime: 0.1,
            dt_safety: 0.9,
            t_end: 1.0,
            sample_stride: 50,
            residual_check_stride: 50,
            entropy_floor: 1e-8,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_prime >= 0.0
            && self.dt_safety > 0.0
            && self.dt_safety <= 1.0
            && self.t_end > 0.0
            && self.sample_stride > 0
            && self.residual_check_stride > 0
            && self.entropy_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid flow parameters: {self:?}")))
        }
    }
}

/// Cone membership of a metric: the flow is parabolic only on `AllPlus`
/// (`1 + a'R/2 > 0` everywhere).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    AllPlus,
    AllMinus,
    Mixed,
}

/// `R_g = exp(-2u) (R_h - 2 laplacian_h u)` pointwise.
pub fn scalar_curvature(domain: &SurfaceDomain, state: &ConformalState) -> Vec<f64> {
    curvature_with_measure(domain, state).0
}

/// Curvature together with the conformal area factor `exp(2u)`; the single
/// exp pass matters in the stepper's inner loop.
pub(crate) fn curvature_with_measure(
    domain: &SurfaceDomain,
    state: &ConformalState,
) -> (Vec<f64>, Vec<f64>) {
    let lap_u = domain.laplacian(&state.u);
    let e2u: Vec<f64> = state.u.iter().map(|&u| (2.0 * u).exp()).collect();
    let r = domain
        .background_scalar_curvature()
        .iter()
        .zip(&lap_u)
        .zip(&e2u)
        .map(|((&rh, &lu), &e)| (rh - 2.0 * lu) / e)
        .collect();
    (r, e2u)
}

/// The reaction term `R + a'/4 R^2` evaluated pointwise.
pub(crate) fn reaction(curvature: &[f64], alpha_prime: f64) -> Vec<f64> {
    curvature
        .iter()
        .map(|&r| r + alpha_prime / 4.0 * r * r)
        .collect()
}

/// Normalization functional `r = avg_g(R + a'/4 R^2)`; subtracting it keeps
/// the total area constant along the flow.
pub fn normalization_r(domain: &SurfaceDomain, state: &ConformalState, params: &FlowParams) -> f64 {
    let r_field = scalar_curvature(domain, state);
    normalization_r_from(domain, state, &r_field, params.alpha_prime)
}

/// Same, reusing an already computed curvature field.
pub(crate) fn normalization_r_from(
    domain: &SurfaceDomain,
    state: &ConformalState,
    curvature: &[f64],
    alpha_prime: f64,
) -> f64 {
    let p = reaction(curvature, alpha_prime);
    domain.integrate(&p, &state.u) / domain.volume(&state.u)
}

/// Classify the state against the cone boundary `1 + a'R/2 = 0`, with a
/// strict margin of 1e-12 so states sitting on the boundary report `Mixed`.
pub fn cone_classify(domain: &SurfaceDomain, state: &ConformalState, params: &FlowParams) -> Cone {
    let r_field = scalar_curvature(domain, state);
    cone_classify_from(&r_field, params.alpha_prime)
}

pub(crate) fn cone_classify_from(curvature: &[f64], alpha_prime: f64) -> Cone {
    const MARGIN: f64 = 1e-12;
    let (lo, hi) = min_max(
        &curvature
            .iter()
            .map(|&r| 1.0 + alpha_prime * r / 2.0)
            .collect::<Vec<_>>(),
    );
    if lo > MARGIN {
        Cone::AllPlus
    } else if hi < -MARGIN {
        Cone::AllMinus
    } else {
        Cone::Mixed
    }
}

/// The two lower bounds on the normalization functional:
/// `r >= -1/a'` (pointwise minimum of the reaction) and
/// `r >= 2 pi chi / Vol`. The first is skipped (reported true) for a' = 0.
pub fn r_lower_bounds_check(
    r: f64,
    domain: &SurfaceDomain,
    state: &ConformalState,
    params: &FlowParams,
) -> (bool, bool) {
    const TOL: f64 = 1e-4;
    let coupling_bound = if params.alpha_prime == 0.0 {
        true
    } else {
        r >= -1.0 / params.alpha_prime - TOL
    };
    let chi = domain.euler_characteristic() as f64;
    let vol = domain.volume(&state.u);
    let topological_bound = r >= 2.0 * std::f64::consts::PI * chi / vol - TOL;
    (coupling_bound, topological_bound)
}

// Conformal (g-metric) operators.

/// `laplacian_g a = exp(-2u) laplacian_h a`.
pub fn laplacian_conformal(domain: &SurfaceDomain, state: &ConformalState, field: &[f64]) -> Vec<f64> {
    domain
        .laplacian(field)
        .iter()
        .zip(&state.u)
        .map(|(&l, &u)| (-2.0 * u).exp() * l)
        .collect()
}

/// `<grad a, grad b>_g = exp(-2u) <grad a, grad b>_h` pointwise.
pub fn gradient_inner_conformal(
    domain: &SurfaceDomain,
    state: &ConformalState,
    a: &[f64],
    b: &[f64],
) -> Vec<f64> {
    domain
        .gradient_inner(a, b)
        .iter()
        .zip(&state.u)
        .map(|(&g, &u)| (-2.0 * u).exp() * g)
        .collect()
}

/// `|grad a|_g^2` pointwise.
pub fn gradient_sq_conformal(domain: &SurfaceDomain, state: &ConformalState, field: &[f64]) -> Vec<f64> {
    gradient_inner_conformal(domain, state, field, field)
}

/// Covariant Hessian of `field` with respect to `g = exp(2u) h0` on the
/// torus, as `(H_xx, H_xy, H_yy)` in background coordinates. The flat
/// background contributes no Christoffel terms; the conformal factor
/// contributes `Gamma^k_ij = d_i u delta^k_j + d_j u delta^k_i - delta_ij d_k u`.
pub fn conformal_hessian(
    domain: &SurfaceDomain,
    state: &ConformalState,
    field: &[f64],
) -> Result<[Vec<f64>; 3]> {
    let [fxx, fxy, fyy] = domain.torus_hessian(field)?;
    let (ux, uy) = domain.torus_partials(&state.u)?;
    let (fx, fy) = domain.torus_partials(field)?;
    let n = field.len();
    let mut hxx = vec![0.0; n];
    let mut hxy = vec![0.0; n];
    let mut hyy = vec![0.0; n];
    for i in 0..n {
        hxx[i] = fxx[i] - (ux[i] * fx[i] - uy[i] * fy[i]);
        hxy[i] = fxy[i] - (uy[i] * fx[i] + ux[i] * fy[i]);
        hyy[i] = fyy[i] - (-ux[i] * fx[i] + uy[i] * fy[i]);
    }
    Ok([hxx, hxy, hyy])
}

/// `|Hess_g field|_g^2 = exp(-4u) (H_xx^2 + 2 H_xy^2 + H_yy^2)`; torus only.
pub fn conformal_hessian_sq(
    domain: &SurfaceDomain,
    state: &ConformalState,
    field: &[f64],
) -> Result<Vec<f64>> {
    let [hxx, hxy, hyy] = conformal_hessian(domain, state, field)?;
    Ok((0..field.len())
        .map(|i| {
            (-4.0 * state.u[i]).exp()
                * (hxx[i] * hxx[i] + 2.0 * hxy[i] * hxy[i] + hyy[i] * hyy[i])
        })
        .collect())
}

/// Euler characteristic comes from the topology, never from integrating
/// curvature; Gauss-Bonnet is a test, not an input.
pub fn gauss_bonnet_integral(domain: &SurfaceDomain, state: &ConformalState) -> f64 {
    let r_field = scalar_curvature(domain, state);
    domain.integrate(&r_field, &state.u)
}

pub fn expected_gauss_bonnet(domain: &SurfaceDomain) -> f64 {
    4.0 * std::f64::consts::PI * domain.euler_characteristic() as f64
}

impl SurfaceKind {
    /// Convenience used by reports.
    pub fn chi(&self) -> i32 {
        self.euler_characteristic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn torus() -> SurfaceDomain {
        SurfaceDomain::build_torus(32, 32, 1.0, 1.0).unwrap()
    }

    #[test]
    fn flat_torus_curvature_zero() {
        let d = torus();
        let state = ConformalState::flat(&d);
        let r = scalar_curvature(&d, &state);
        assert!(crate::util::linf(&r) < 1e-12);
        let params = FlowParams::default();
        assert_relative_eq!(normalization_r(&d, &state, &params), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn round_sphere_curvature_constant() {
        let d = SurfaceDomain::build_sphere(2, 1.0).unwrap();
        let state = ConformalState::flat(&d);
        let r = scalar_curvature(&d, &state);
        for &v in &r {
            assert!((v - 2.0).abs() < 1e-12);
        }
        // r = 2 + (1/4)*4 = 3 for alpha' = 1.
        let params = FlowParams {
            alpha_prime: 1.0,
            ..FlowParams::default()
        };
        assert_relative_eq!(normalization_r(&d, &state, &params), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sinusoid_ansatz_matches_symbolic_oracle() {
        // u = eps sin(2 pi x): laplacian_h u = -(2pi)^2 eps sin(2 pi x) exactly,
        // so R = 2 eps (2pi)^2 sin(2 pi x) exp(-2u).
        let d = torus();
        let eps = 0.01;
        let u: Vec<f64> = d
            .positions()
            .iter()
            .map(|p| eps * (2.0 * PI * p[0]).sin())
            .collect();
        let state = ConformalState::new(u.clone(), 0.0).unwrap();
        let r = scalar_curvature(&d, &state);
        for ((rv, &uv), p) in r.iter().zip(&u).zip(d.positions()) {
            let symbolic = 2.0 * eps * (2.0 * PI).powi(2) * (2.0 * PI * p[0]).sin() * (-2.0 * uv).exp();
            assert!((rv - symbolic).abs() < 1e-9, "{rv} vs {symbolic}");
        }
    }

    #[test]
    fn conformal_scaling_law() {
        // scalar_curvature(u + c) = exp(-2c) scalar_curvature(u).
        let d = torus();
        let u: Vec<f64> = d
            .positions()
            .iter()
            .map(|p| 0.05 * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos())
            .collect();
        let c = 0.37;
        let shifted: Vec<f64> = u.iter().map(|&v| v + c).collect();
        let r0 = scalar_curvature(&d, &ConformalState::new(u, 0.0).unwrap());
        let r1 = scalar_curvature(&d, &ConformalState::new(shifted, 0.0).unwrap());
        for (a, b) in r0.iter().zip(&r1) {
            assert!((b - a * (-2.0 * c).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_matches_refined_mesh_oracle() {
        // Same analytic state quadratured on a finer icosphere.
        let params = FlowParams {
            alpha_prime: 0.3,
            ..FlowParams::default()
        };
        let state_on = |d: &SurfaceDomain| {
            let u: Vec<f64> = d
                .positions()
                .iter()
                .map(|p| {
                    let n = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let z = p[2] / n;
                    0.05 * 0.5 * (3.0 * z * z - 1.0)
                })
                .collect();
            ConformalState::new(u, 0.0).unwrap()
        };
        let coarse = SurfaceDomain::build_sphere(3, 1.0).unwrap();
        let fine = SurfaceDomain::build_sphere(5, 1.0).unwrap();
        let r_coarse = normalization_r(&coarse, &state_on(&coarse), &params);
        let r_fine = normalization_r(&fine, &state_on(&fine), &params);
        assert!(
            (r_coarse - r_fine).abs() / r_fine.abs() < 5e-3,
            "coarse {r_coarse} vs refined {r_fine}"
        );
    }

    #[test]
    fn cone_classification_cases() {
        let d = torus();
        let params = FlowParams {
            alpha_prime: 1.0,
            ..FlowParams::default()
        };
        assert_eq!(
            cone_classify(&d, &ConformalState::flat(&d), &params),
            Cone::AllPlus
        );
        let s = SurfaceDomain::build_sphere(2, 1.0).unwrap();
        assert_eq!(
            cone_classify(&s, &ConformalState::flat(&s), &params),
            Cone::AllPlus
        );
        // Large-amplitude sinusoid drives min(1 + a'R/2) negative while the
        // max stays positive: Mixed. Verified against nodewise extrema.
        let u: Vec<f64> = d
            .positions()
            .iter()
            .map(|p| 0.2 * (2.0 * PI * p[0]).sin())
            .collect();
        let state = ConformalState::new(u, 0.0).unwrap();
        let r = scalar_curvature(&d, &state);
        let (lo, hi) = crate::util::min_max(
            &r.iter().map(|&v| 1.0 + params.alpha_prime * v / 2.0).collect::<Vec<_>>(),
        );
        assert!(lo < 0.0 && hi > 0.0, "construction sanity: {lo} {hi}");
        assert_eq!(cone_classify(&d, &state, &params), Cone::Mixed);
    }

    #[test]
    fn r_lower_bounds_trivial_cases() {
        let d = torus();
        let params = FlowParams {
            alpha_prime: 1.0,
            ..FlowParams::default()
        };
        let state = ConformalState::flat(&d);
        let r = normalization_r(&d, &state, &params);
        assert_eq!(r_lower_bounds_check(r, &d, &state, &params), (true, true));

        let s = SurfaceDomain::build_sphere(2, 1.0).unwrap();
        let state = ConformalState::flat(&s);
        let r = normalization_r(&s, &state, &params);
        // 3 >= -1 and 3 >= 2 pi chi / 4 pi = 1.
        assert_eq!(r_lower_bounds_check(r, &s, &state, &params), (true, true));
    }

    #[test]
    fn gauss_bonnet_to_spectral_accuracy_on_torus() {
        let d = torus();
        let u: Vec<f64> = d
            .positions()
            .iter()
            .map(|p| 0.05 * (2.0 * PI * p[0]).sin() + 0.02 * (2.0 * PI * 2.0 * p[1]).cos())
            .collect();
        let state = ConformalState::new(u, 0.0).unwrap();
        assert!(gauss_bonnet_integral(&d, &state).abs() <= 1e-8);
    }

    #[test]
    fn gauss_bonnet_on_sphere_to_mesh_accuracy() {
        // Within 1% at subdivisions 4, shrinking under refinement.
        let mut errs = Vec::new();
        for sub in [3u32, 4] {
            let d = SurfaceDomain::build_sphere(sub, 1.0).unwrap();
            let z_bump: Vec<f64> = d.positions().iter().map(|p| 0.05 * p[2]).collect();
            let state = ConformalState::new(z_bump, 0.0).unwrap();
            let gb = gauss_bonnet_integral(&d, &state);
            errs.push((gb - 8.0 * PI).abs());
        }
        assert!(errs[1] / (8.0 * PI) < 0.01, "GB error {:?}", errs);
        assert!(errs[1] < errs[0], "refinement should reduce GB error: {errs:?}");
    }
}
