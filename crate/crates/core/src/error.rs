use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("header mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    HeaderMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseNumber { row: usize, column: String, value: String },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("rating `{0}` is not covered by the rating map")]
    UnmappedRating(String),

    #[error("invalid rating map: {0}")]
    RatingMap(String),

    #[error("class `{class}` has {count} samples; at least {required} are required")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid hyperparameter for {algorithm}: {message}")]
    Hyperparameter { algorithm: &'static str, message: String },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("non-finite value in input: {0}")]
    NonFinite(String),

    #[error("ECOC column {column} reduces to a single-class problem on the training data")]
    DegenerateColumn { column: usize },

    #[error("no valid coding matrix found after {0} attempts")]
    CodingMatrixSearch(usize),

    #[error("ratio-mode importance is undefined when the baseline error is 0; use difference mode")]
    ZeroBaselineError,

    #[error("no class has both positive and negative examples; ROC AUC is undefined")]
    NoComputableAuc,

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
