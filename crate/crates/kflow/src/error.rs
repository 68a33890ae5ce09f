//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or dimension mismatch (wrong tensor shape, non-power-of-two axis, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// Argument outside its documented domain (bad band id, t out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerical failure (non-finite values, broken symmetry, divergence, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed or incompatible file contents.
    #[error("format error: {0}")]
    Format(String),

    /// Unknown or inadmissible class label.
    #[error("label error: {0}")]
    Label(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn label(msg: impl Into<String>) -> Self {
        Error::Label(msg.into())
    }
}
