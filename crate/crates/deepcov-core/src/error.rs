//! Crate-wide error type.

use alloc::string::String;

/// Errors shared by all modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Matrix or vector dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A quantity left its numerical domain (non-finite value, negative
    /// variance beyond tolerance, vanishing denominator).
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    /// A map or series has no finite limit for the given parameters.
    #[error("divergence: {0}")]
    Divergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::NumericalDomain(msg.into())
    }
}
