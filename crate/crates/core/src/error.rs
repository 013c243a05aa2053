use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum QmeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no intensity eigenmode passes the threshold (tau = {tau})")]
    EmptyBase { tau: f64 },

    #[error("measure undefined: {0}")]
    UndefinedMeasure(String),

    #[error("kernel {0} requires a vector basis")]
    UnsupportedKernel(&'static str),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, QmeError>;

impl QmeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QmeError::InvalidArgument(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        QmeError::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QmeError::Io {
            path: path.into(),
            source,
        }
    }
}
