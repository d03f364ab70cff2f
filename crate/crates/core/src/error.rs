//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |M - M^dag| entry {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("strategy contract violation: {0}")]
    Strategy(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
