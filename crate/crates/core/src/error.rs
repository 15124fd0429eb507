use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data integrity violation: {0}")]
    Integrity(String),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary is empty after filtering words below min_count {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("course week {week} has no in-vocabulary tokens after preprocessing")]
    EmptyWeekDocument { week: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}, event {event}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        event: usize,
    },

    #[error("no evaluable students in the test window")]
    NoEvaluableStudents,

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Split(_))
    }
}
