use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KqpError {
    #[error("input has nonzero phase average {0:e}")]
    MeanNotZero(f64),
    #[error("small divisor |omega.l| = {value:e} below floor at l = {ell:?}")]
    SmallDivisorUnderflow { ell: Vec<i32>, value: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("argument of the square root is not positive (min {0:e})")]
    NonPositiveArgument(f64),
    #[error("fixed point did not converge: {0}")]
    NoConvergence(String),
    #[error("matrix is numerically singular (condition estimate {0:e})")]
    Singular(f64),
    #[error("Newton step failed: {0}")]
    StepFailed(String),
    #[error("parameter rejected: {0}")]
    BadParameter(String),
    #[error("exponent constraint violated: {0}")]
    ExponentViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl KqpError {
    /// Mathematical failures map to exit code 2, everything else to 1.
    pub fn is_mathematical(&self) -> bool {
        !matches!(self, KqpError::Config(_) | KqpError::Io(_) | KqpError::ExponentViolation(_))
    }
}

pub type Result<T> = std::result::Result<T, KqpError>;
