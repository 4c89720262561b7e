use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Core(#[from] cef_core::Error),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("missing or invalid session token")]
    Unauthorized,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("session `{0}` is completed")]
    Completed(String),
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("{0} model is required for AI conditions")]
    MissingModel(&'static str),
    #[error("corrupt event log: {0}")]
    Corruption(String),
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

impl StudyError {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        StudyError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StudyError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = StudyError> = std::result::Result<T, E>;
