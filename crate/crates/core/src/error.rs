use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoshError>;

#[derive(Debug, Error)]
pub enum CoshError {
    /// An argument outside the domain of the operation (e.g. `f <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that violates a documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Operation invoked with inputs of the wrong kind or shape.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("demodulation failed: {0}")]
    Demodulation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoshError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CoshError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CoshError::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        CoshError::Usage(msg.into())
    }
}
