//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Exact enumeration refuses models with more than
    /// [`crate::rbm::ENUMERATION_LIMIT`] total units.
    #[error("enumeration guard exceeded: N + M = {actual} > {limit}")]
    EnumerationGuard { actual: usize, limit: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training stages must run in order; see `ta::TrainingPhase`.
    #[error("training phase error: {0}")]
    Phase(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
