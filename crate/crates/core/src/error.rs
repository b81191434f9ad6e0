use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("series of length {len} is too short for window {window}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("insufficient tail sample: k={k} with {len} observations")]
    InsufficientTail { k: usize, len: usize },

    #[error("histogram bin edges differ")]
    MismatchedEdges,

    #[error("{path}:{line}: {reason}")]
    MalformedRow { path: PathBuf, line: usize, reason: String },

    #[error("{path}:{line}: date {date} does not follow the previous row")]
    NonIncreasingDates { path: PathBuf, line: usize, date: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Validation failures map to CLI exit status 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidArgument { .. }
                | Error::NonPositivePrice { .. }
                | Error::WindowTooLarge { .. }
                | Error::InsufficientTail { .. }
                | Error::MismatchedEdges
                | Error::MalformedRow { .. }
                | Error::NonIncreasingDates { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
