use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty catalog")]
    EmptyCatalog,

    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("duplicate exercise id `{0}`")]
    DuplicateId(String),

    #[error("unknown exercise id `{0}`")]
    UnknownExercise(String),

    #[error("unknown character id `{0}`")]
    UnknownCharacter(String),

    #[error("malformed tables: {0}")]
    Tables(String),

    #[error("score profile of `{0}` is constant; correlation undefined")]
    DegenerateProfile(String),

    #[error("cluster count {k} out of range 1..={n}")]
    ClusterCount { k: usize, n: usize },

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("need at least 2 fold groups, found {0}")]
    TooFewGroups(usize),

    #[error("dropdown needs at least {needed} exercises, has {actual}")]
    DropdownTooSmall { needed: usize, actual: usize },

    #[error("degenerate contrast: fact and foil are both `{0}`")]
    DegenerateContrast(String),

    #[error("missing fact-table entry for ({exercise}, {dimension})")]
    MissingFact { exercise: String, dimension: String },

    #[error("missing template slot `{0}`")]
    MissingSlot(String),

    #[error("trial index {index} outside intervention block of {size}")]
    TrialOutOfRange { index: usize, size: usize },

    #[error("llm transport: {0}")]
    Llm(String),

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
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
