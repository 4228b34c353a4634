//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input values are unusable (non-finite, wrong magic, unsupported layout).
    #[error("data error: {0}")]
    Data(String),

    /// Dataset or plan structure is inconsistent (overlap, missing coverage,
    /// dimension mismatch).
    #[error("structure error: {0}")]
    Structure(String),

    /// A compressed stream cannot be decoded.
    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    /// A relative error bound was requested on data with zero value range.
    #[error("degenerate value range: {0}")]
    DegenerateRange(String),

    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptStream(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
