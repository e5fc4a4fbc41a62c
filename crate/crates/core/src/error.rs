use std::path::PathBuf;

use thiserror::Error;

use crate::class::Class;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need more than {required}, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class {0} has no training samples")]
    EmptyClass(Class),

    #[error("no NM-prompted frames available to set the rejection floor")]
    NoRestFrames,

    #[error("missing movement onset for prompt change {0}")]
    MissingOnset(usize),

    #[error("non-finite value in {location}: {detail}")]
    NonFinite { location: String, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error in {path}: {detail}")]
    Data { path: PathBuf, detail: String },

    #[error("test-trial leakage: {0}")]
    Leakage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn data(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Data {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
