//! Numerical simulator and verification harness for the normalized
//! second-order renormalization group flow on closed surfaces.
//!
//! The flow deforms a metric `g = e^{2u} h0` inside its conformal class on
//! a flat torus or a round sphere:
//!
//! ```text
//!   du/dt = -1/2 (R + a'/4 R^2 - r),      r = avg(R + a'/4 R^2)
//! ```
//!
//! where `R` is the scalar curvature of `g` and `r` keeps the total area
//! constant. For `a' = 0` this is the normalized Ricci flow. The crate
//! provides:
//!
//! * [`surface`] — pseudospectral torus and cotangent-Laplacian icosphere
//!   discretizations with quadrature, gradients and Poisson solves;
//! * [`curvature`] — conformal scalar curvature, the normalization
//!   functional and the parabolic-cone classification;
//! * [`flow`] — an RK4 integrator with curvature-dependent step control,
//!   the Abel comparison ODE and the closed-form `R^2` envelope;
//! * [`potentials`] — first/second order curvature potentials, soliton
//!   residual integrals, entropy dissipation and Harnack quantities;
//! * [`validation`] — a deterministic battery checking every identity,
//!   bound and monotonicity statement the solver is supposed to satisfy;
//! * [`config`] / [`output`] — run configuration, CSV/JSON/snapshot/SVG
//!   emission used by the `rgflow` binary.
//!
//! The `examples/` directory contains one runnable program per capability;
//! see the README for a tour.

pub mod config;
pub mod curvature;
mod error;
pub mod flow;
pub mod output;
pub mod potentials;
pub mod surface;
mod util;
pub mod validation;

pub use error::{Error, Result};

pub use curvature::{Cone, ConformalState, FlowParams};
pub use flow::{DiagnosticsRecord, Termination, Trajectory};
pub use surface::{SurfaceDomain, SurfaceKind};
