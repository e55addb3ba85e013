//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the feature-extraction stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A byte stream does not parse as the expected file format.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    /// A container file parsed but its checksum does not match.
    #[error("corrupted container: {0}")]
    Corruption(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
