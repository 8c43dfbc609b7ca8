use thiserror::Error;

/// Errors raised by model construction and numerical evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a model or query invariant.
    #[error("invalid parameter: {0}")]
    Validation(String),

    /// A numerical routine failed (no bracket, no convergence, near-singular system).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The requested operation is not available for this model.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
