use thiserror::Error;

/// Errors surfaced by domain construction, solvers and the flow integrator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("torus resolution {nx}x{ny} invalid: both sizes must be even and >= 8")]
    InvalidResolution { nx: usize, ny: usize },

    #[error("sphere subdivision level {0} exceeds the memory guard (max 8)")]
    TooManySubdivisions(u32),

    #[error("state left the parabolic cone (1 + a'R/2 > 0 fails somewhere) at t = {t}")]
    ConeExit { t: f64 },

    #[error("time step underflow (dt = {dt:.3e} at t = {t})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("scalar curvature is not positive enough (min R = {min_r:.6e}, floor = {floor:.1e})")]
    NonpositiveCurvature { min_r: f64, floor: f64 },

    #[error("Poisson source violates the compatibility condition (mean {mean:.3e} vs bound {bound:.3e})")]
    IncompatibleSource { mean: f64, bound: f64 },

    #[error("conjugate gradient did not converge: relative residual {residual:.3e} after {iters} iterations")]
    CgDidNotConverge { iters: usize, residual: f64 },

    #[error("operation requires a flat torus domain")]
    WrongDomainKind,

    #[error("comparison solution blew up (|y| > {limit:.1e}) at t = {t}")]
    ComparisonBlowUp { t: f64, limit: f64 },

    #[error("closed-form envelope expired (denominator changed sign) at t = {t}")]
    EnvelopeExpired { t: f64 },

    #[error("non-finite field value at node {index}")]
    NonFiniteField { index: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
