use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid epidemic parameters: {0}")]
    InvalidParams(String),

    #[error("invalid environment config: {0}")]
    InvalidConfig(String),

    #[error("episode already finished; call reset() first")]
    EpisodeFinished,

    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },

    #[error("checkpoint does not match its declared architecture: {0}")]
    ChecksumMismatch(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error")]
    Json(#[from] serde_json::Error),

    #[error("malformed report: {0}")]
    MalformedReport(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
