use thiserror::Error;

/// Errors raised by the estimation, clustering and diagnostics routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("empty data set")]
    EmptyData,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("IRLS denominator {denominator:e} fell below the guard {guard:e}")]
    NonPositiveDenominator { denominator: f64, guard: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("every restart degenerated (clusters emptied repeatedly)")]
    AllRestartsDegenerate,

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("constraint boundary reached at the functional solution (M/m = {ratio:.4}, m = {min_eig:.4})")]
    ConstraintBoundary { ratio: f64, min_eig: f64 },

    #[error("cluster geometry is not an interval: {0}")]
    UnsupportedGeometry(String),

    #[error("singular influence system (condition estimate {0:e})")]
    SingularSystem(f64),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("contamination sampler acceptance rate {0:e} below 1e-4")]
    AcceptanceTooLow(f64),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
