use std::path::PathBuf;

use thiserror::Error;

/// Failure of an external or local model provider (captioner, embedder, chat model).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("provider request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("provider returned a malformed response: {0}")]
    Malformed(String),
    #[error("no scripted caption for video {video_id:?} frame {frame_index}")]
    NotScripted { video_id: String, frame_index: u64 },
}

impl ProviderError {
    /// Whether another attempt can reasonably succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Timeout { .. } | ProviderError::Unavailable(_))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("format error at {path}:{line}: {detail}")]
    FormatAtLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("cannot read source {path}: {source}")]
    Source {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
