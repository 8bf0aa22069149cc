//! Discretizations of the two supported closed surfaces.
//!
//! A [`SurfaceDomain`] bundles a background metric `h0` (flat torus or round
//! sphere), its quadrature weights, scalar curvature and differential
//! operators. The sign convention is `laplacian = div(grad)` with nonpositive
//! spectrum, so the heat equation `du/dt = laplacian(u)` is dissipative.
//! Domains are immutable after construction and safe to share across threads.

mod sphere;
mod torus;

use crate::error::{Error, Result};
use crate::util::first_non_finite;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    FlatTorus,
    RoundSphere,
}

impl SurfaceKind {
    pub fn euler_characteristic(&self) -> i32 {
        match self {
            SurfaceKind::FlatTorus => 0,
            SurfaceKind::RoundSphere => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SurfaceKind::FlatTorus => "torus",
            SurfaceKind::RoundSphere => "sphere",
        }
    }
}

enum Ops {
    Torus(torus::TorusOps),
    Sphere(sphere::SphereOps),
}

pub struct SurfaceDomain {
    kind: SurfaceKind,
    node_count: usize,
    background_scalar_curvature: Vec<f64>,
    quadrature_weights: Vec<f64>,
    background_area: f64,
    positions: Vec<[f64; 3]>,
    lambda_max_abs: f64,
    dealias: bool,
    ops: Ops,
}

impl SurfaceDomain {
    /// Uniform periodic grid with spectral operators. Sizes must be even and
    /// at least 8 so the Nyquist handling stays symmetric.
    pub fn build_torus(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::InvalidResolution { nx, ny });
        }
        assert!(lx > 0.0 && ly > 0.0, "torus side lengths must be positive");
        let ops = torus::TorusOps::new(nx, ny, lx, ly);
        let node_count = ops.node_count();
        let cell = lx * ly / node_count as f64;
        Ok(SurfaceDomain {
            kind: SurfaceKind::FlatTorus,
            node_count,
            background_scalar_curvature: vec![0.0; node_count],
            quadrature_weights: vec![cell; node_count],
            background_area: lx * ly,
            positions: ops.positions(),
            lambda_max_abs: ops.lambda_max_abs(),
            dealias: false,
            ops: Ops::Torus(ops),
        })
    }

    /// Geodesic icosphere of the given radius. `subdivisions = s` yields
    /// `10 * 4^s + 2` vertices.
    pub fn build_sphere(subdivisions: u32, radius: f64) -> Result<Self> {
        assert!(radius > 0.0, "sphere radius must be positive");
        let ops = sphere::SphereOps::new(subdivisions, radius)?;
        let node_count = ops.node_count();
        let weights = ops.areas.clone();
        let background_area = ops.total_area();
        Ok(SurfaceDomain {
            kind: SurfaceKind::RoundSphere,
            node_count,
            background_scalar_curvature: vec![2.0 / (radius * radius); node_count],
            quadrature_weights: weights,
            background_area,
            positions: ops.positions().to_vec(),
            lambda_max_abs: ops.lambda_max_abs(),
            dealias: false,
            ops: Ops::Sphere(ops),
        })
    }

    /// Enable the 3/2-rule dealiasing filter on flow right-hand sides
    /// (torus only; ignored on the sphere).
    pub fn with_dealiasing(mut self, enabled: bool) -> Self {
        self.dealias = enabled && self.kind == SurfaceKind::FlatTorus;
        self
    }

    pub fn dealiasing_enabled(&self) -> bool {
        self.dealias
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn euler_characteristic(&self) -> i32 {
        self.kind.euler_characteristic()
    }

    pub fn background_scalar_curvature(&self) -> &[f64] {
        &self.background_scalar_curvature
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quadrature_weights
    }

    /// Total background area (`lx*ly` for the torus, mesh area for the sphere).
    pub fn background_area(&self) -> f64 {
        self.background_area
    }

    /// Node coordinates: `(x, y, 0)` on the torus, ambient xyz on the sphere.
    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    /// Magnitude of the most negative Laplacian eigenvalue (closed form on
    /// the torus, power-iteration estimate on the sphere).
    pub fn lambda_max_abs(&self) -> f64 {
        self.lambda_max_abs
    }

    /// Background Laplacian (nonpositive spectrum).
    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        self.check_len(field);
        match &self.ops {
            Ops::Torus(t) => t.laplacian(field),
            Ops::Sphere(s) => s.laplacian(field),
        }
    }

    /// Pointwise squared gradient norm with respect to the background metric.
    pub fn gradient_sq(&self, field: &[f64]) -> Vec<f64> {
        self.gradient_inner(field, field)
    }

    /// Pointwise `<grad a, grad b>` with respect to the background metric.
    pub fn gradient_inner(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.check_len(a);
        self.check_len(b);
        match &self.ops {
            Ops::Torus(t) => t.gradient_inner(a, b),
            Ops::Sphere(s) => s.gradient_inner(a, b),
        }
    }

    /// `integral <grad a, grad b> dmu_h`, computed so it matches
    /// `-integral a*laplacian(b) dmu_h` to roundoff. Conformally invariant
    /// in two dimensions, so this is also the `g`-metric Dirichlet pairing.
    pub fn dirichlet_form(&self, a: &[f64], b: &[f64]) -> f64 {
        self.check_len(a);
        self.check_len(b);
        match &self.ops {
            Ops::Torus(t) => t.dirichlet_form(a, b),
            Ops::Sphere(s) => s.dirichlet_form(a, b),
        }
    }

    /// Integration against the conformal measure:
    /// `sum_i field_i * exp(2 u_i) * w_i`.
    pub fn integrate(&self, field: &[f64], conformal_u: &[f64]) -> f64 {
        self.check_len(field);
        self.check_len(conformal_u);
        field
            .iter()
            .zip(conformal_u)
            .zip(&self.quadrature_weights)
            .map(|((&f, &u), &w)| f * (2.0 * u).exp() * w)
            .sum()
    }

    /// Integration against the background measure.
    pub fn integrate_background(&self, field: &[f64]) -> f64 {
        self.check_len(field);
        field
            .iter()
            .zip(&self.quadrature_weights)
            .map(|(&f, &w)| f * w)
            .sum()
    }

    /// Area of the conformal metric `g = exp(2u) h0`.
    pub fn volume(&self, conformal_u: &[f64]) -> f64 {
        conformal_u
            .iter()
            .zip(&self.quadrature_weights)
            .map(|(&u, &w)| (2.0 * u).exp() * w)
            .sum()
    }

    /// Mean-zero background solution of `laplacian(phi) = source - mean(source)`.
    /// The mean is removed in the background measure; callers working in the
    /// conformal gauge fix their own constant afterwards.
    pub fn solve_poisson_background(&self, source: &[f64]) -> Result<Vec<f64>> {
        self.solve_poisson_background_with_guess(source, None)
    }

    /// Same as [`solve_poisson_background`](Self::solve_poisson_background)
    /// with a warm-start guess for the sphere CG solve.
    pub fn solve_poisson_background_with_guess(
        &self,
        source: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        self.check_len(source);
        if let Some(i) = first_non_finite(source) {
            return Err(Error::NonFiniteField { index: i });
        }
        match &self.ops {
            Ops::Torus(t) => Ok(t.solve_poisson(source)),
            Ops::Sphere(s) => {
                let mut phi = s.solve_poisson(source, guess)?;
                let mean = self.integrate_background(&phi) / self.background_area;
                for v in phi.iter_mut() {
                    *v -= mean;
                }
                Ok(phi)
            }
        }
    }

    /// 3/2-rule low-pass filter (torus); identity on the sphere.
    pub fn dealias_filter(&self, field: &[f64]) -> Vec<f64> {
        self.check_len(field);
        match &self.ops {
            Ops::Torus(t) => t.dealias(field),
            Ops::Sphere(_) => field.to_vec(),
        }
    }

    /// Spectral background Hessian `(f_xx, f_xy, f_yy)`; torus only. Sphere
    /// meshes never form Hessians — integral identities are used instead.
    pub fn torus_hessian(&self, field: &[f64]) -> Result<[Vec<f64>; 3]> {
        self.check_len(field);
        match &self.ops {
            Ops::Torus(t) => Ok(t.hessian(field)),
            Ops::Sphere(_) => Err(Error::WrongDomainKind),
        }
    }

    /// Spectral first partials `(f_x, f_y)`; torus only.
    pub fn torus_partials(&self, field: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(field);
        match &self.ops {
            Ops::Torus(t) => Ok(t.partials(field)),
            Ops::Sphere(_) => Err(Error::WrongDomainKind),
        }
    }

    fn check_len(&self, field: &[f64]) {
        assert_eq!(
            field.len(),
            self.node_count,
            "field length does not match node count"
        );
    }
}
