use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical pipelines.
///
/// Soft conditions (virtual levels, spread in recovered boundary data) are
/// reported as warnings in the diagnostics of each result instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unitary: ||U^H U - I|| = {norm:.3e}")]
    NotUnitary { norm: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("integrator failure at x = {x}: {reason}")]
    IntegratorFailure { x: f64, reason: String },
    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,
    #[error("coefficient M_- is singular at k = {k} (condition {cond:.3e})")]
    SingularCoefficient { k: f64, cond: f64 },
    #[error("override violates P U0 = P U (residual {residual:.3e})")]
    ConstraintViolated { residual: f64 },
    #[error("zero-energy frame is singular at every node")]
    AllSingular,
    #[error("test function {index} is outside the operator domain: {reason}")]
    DomainViolation { index: usize, reason: String },
    #[error("Darboux factor is singular at the origin")]
    SingularAtOrigin,
    #[error("scattering data tail too large: ||S(k_max) - U_hat|| residual = {norm:.3e} > {bound:.3e}")]
    TailTooLarge { norm: f64, bound: f64 },
    #[error("Nystrom system ill-conditioned at x = {x} (condition estimate {cond:.3e})")]
    IllConditioned { x: f64, cond: f64 },
    #[error("Psi(0) + i Psi_x(0) is not invertible at any usable k node")]
    NonInvertibleTrace,
    #[error("ray {ray} Jost function vanishes on the real axis at k = {k}")]
    JostZeroOnAxis { ray: usize, k: f64 },
    #[error("virtual level suspected: |M_hat| = {value:.3e} at smallest |k|")]
    VirtualLevelSuspected { value: f64 },
    #[error("log-modulus has not decayed at the grid ends ({value:.3e})")]
    TailNotDecayed { value: f64 },
    #[error("unitary completion of the last column is degenerate at k = {k}")]
    UnitaryCompletionDegenerate { k: f64 },
    #[error("too many singular nodes while recovering F_n ({skipped} of {total})")]
    SystemSingular { skipped: usize, total: usize },
    #[error("{0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
