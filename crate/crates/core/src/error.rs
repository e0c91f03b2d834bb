use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QalError {
    /// An instance or config failed validation. `path` names the offending field.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument { name: &'static str, message: String },

    #[error("unknown hypothesis `{0}`")]
    UnknownHypothesis(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("key mismatch between exact risks and estimates: {0}")]
    KeyMismatch(String),

    /// The circuit would need more qubits than the configured cap.
    #[error("capacity exceeded: layout needs {required} qubits, cap is {cap}")]
    Capacity { required: usize, cap: usize },

    #[error("loss contract violated: {0}")]
    Contract(String),

    #[error("failed to read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl QalError {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        QalError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        QalError::InvalidArgument {
            name,
            message: message.into(),
        }
    }
}
