use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at {0}")]
    GammaPole(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale-factor exponent ell = 1 is not supported")]
    UnsupportedExponent,

    #[error("scale-factor exponent ell = {0} > 1 is a documented extension and is not supported")]
    UnsupportedExtension(f64),

    #[error("hypergeometric series did not converge within {terms} terms (z = {z})")]
    NonConvergence { terms: usize, z: f64 },

    #[error("degenerate hypergeometric parameters: c - a - b is an integer")]
    DegenerateParameters,

    #[error("cone violation: r = {r} exceeds radius {radius}")]
    ConeViolation { r: f64, radius: f64 },

    #[error("near-diagonal K0 branches disagree (relative difference {0:e})")]
    StabilizationFailure(f64),

    #[error("adaptive quadrature exceeded max depth {depth} on [{a}, {b}]")]
    QuadratureDepth { depth: usize, a: f64, b: f64 },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("ODE step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
