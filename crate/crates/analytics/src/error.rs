use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("singular design: rank {rank} < {params} parameters")]
    Singular { rank: usize, params: usize },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("incomplete session {session_id}: {reason}")]
    Incomplete { session_id: String, reason: String },
    #[error("no sessions found in {0}")]
    NoSessions(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Study(#[from] cef_study::StudyError),
    #[error(transparent)]
    Core(#[from] cef_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AnalyticsError {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        AnalyticsError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AnalyticsError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = AnalyticsError> = std::result::Result<T, E>;
