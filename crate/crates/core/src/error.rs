use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gamma function pole at {0}")]
    Pole(String),

    #[error("value {0} is outside the 64-bit floating point range")]
    Overflow(String),

    #[error("invalid operator request: {0}")]
    InvalidRequest(String),

    /// Building at `digits` and `digits + 1` gave different 64-bit matrices.
    #[error("{digits} digits are not enough: matrices at digits and digits+1 differ by {deviation:e}")]
    PrecisionWarning { digits: u32, deviation: f64 },

    #[error("{0} did not converge within its iteration budget")]
    NonConvergence(&'static str),

    #[error("quadrature tolerance not met (estimated error {0:e})")]
    ToleranceNotMet(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("size budget exceeded: {0}")]
    BudgetExceeded(String),
}
