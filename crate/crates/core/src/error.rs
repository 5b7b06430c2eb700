use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible patch: {0}")]
    Feasibility(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("unsupported image format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("protocol error: {message} (payload: {excerpt:?})")]
    Protocol { message: String, excerpt: String },

    #[error("remote request {id} timed out after {timeout_ms} ms")]
    Timeout { id: String, timeout_ms: u64 },

    #[error("target model failed: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn protocol(message: impl Into<String>, payload: &str) -> Self {
        const EXCERPT: usize = 120;
        let excerpt = match payload.char_indices().nth(EXCERPT) {
            Some((end, _)) => format!("{}...", &payload[..end]),
            None => payload.to_string(),
        };
        Error::Protocol {
            message: message.into(),
            excerpt,
        }
    }

    /// Timeouts may succeed on retry; every other failure is permanent.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Timeout { .. })
    }
}
