use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engines, analytics and sweep harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value failed structural validation (for example a gate table that
    /// is not symplectic).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A protocol, annealed or sweep configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A closed-form or root-finding evaluation left its domain.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A fit or estimator could not produce a result from the data.
    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
