//! Error type shared by the library modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum RotorError {
    /// A precondition on an input value was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Two objects refer to incompatible bases or molecule kinds.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    /// The truncated basis is too small for the requested computation.
    #[error("basis overflow: {0}")]
    BasisOverflow(String),
    /// A numerical procedure left its validity domain (norm drift,
    /// eigensolver breakdown, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The operation is defined, but not for this input class.
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, RotorError>;
