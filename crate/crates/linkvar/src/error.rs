//! Crate-wide error type.

/// Errors surfaced by the solver pipeline.
///
/// Validation errors map to exit code 2, solver failures to 3 and
/// geometry failures to 4 (see [`crate::cli`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate nonlinearity: f vanishes identically on the certification range")]
    DegenerateNonlinearity,
    #[error("(F3) failure: A(u) = (F(u) + eps*u^2)/|u|^q has no positive lower bound (min {min:.3e})")]
    NonCoerciveF { min: f64 },
    #[error("invalid resolution: Nr and Nz must both be >= 8 (got {nr} x {nz})")]
    InvalidResolution { nr: usize, nz: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("spectral gap violation: eigenvalue {value:.6e} lies within {tol:.3e} of zero")]
    SpectralGapViolation { value: f64, tol: f64 },
    #[error("operator has no negative spectrum; the problem is not strongly indefinite")]
    NoNegativeSpectrum,
    #[error("state has relative mass {mass:.3e} outside the resolved eigenspace")]
    UnresolvedComponent { mass: f64 },
    #[error("this check is stated only for lambda = 0 (context has lambda = {lambda})")]
    LambdaNotZero { lambda: f64 },
    #[error("linking geometry failure: {0}")]
    GeometryFailure(String),
    #[error("no anticoercivity: sup J on the half-ball boundary stayed positive up to R = {r_max:.3e}")]
    NoAnticoercivity { r_max: f64 },
    #[error("rho too large: 1 - lambda*g(rho)/f(rho) = {value:.3e} <= 0")]
    RhoTooLarge { value: f64 },
    #[error("inner maximization diverged: value {value:.3e} exceeded cap {cap:.3e}")]
    InnerDivergence { value: f64, cap: f64 },
    #[error("line search stalled in the outer sphere descent")]
    LineSearchStall,
    #[error("solution collapsed to zero: tau-norm {tau:.3e} < delta/2 = {threshold:.3e}")]
    CollapseToZero { tau: f64, threshold: f64 },
    #[error("iteration limit exceeded in {0}")]
    MaxIterExceeded(String),
    #[error("not the Maxwell case: reconstruction requires N = 3, K = 2, a = 1")]
    NotMaxwellCase,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
