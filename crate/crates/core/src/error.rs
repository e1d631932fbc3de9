//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (non-finite input, bad
    /// ranges, mismatched coordinate frames, empty input where data is
    /// required).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An expression referenced an element tag that does not exist in the
    /// element map it is evaluated against.
    #[error("unknown element tag `{0}`")]
    UnknownTag(String),

    /// Tensor or parameter shapes are inconsistent.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
