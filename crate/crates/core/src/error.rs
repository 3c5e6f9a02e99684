//! Error type shared across the engine.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("unknown asset `{0}`")]
    UnknownAsset(String),

    #[error("insufficient history: need {needed} rows, have {actual}")]
    InsufficientHistory { needed: usize, actual: usize },

    #[error("incomplete data at row {row}, asset `{asset}`")]
    IncompleteData { row: usize, asset: String },

    #[error("index {index} out of range [{min}, {max}]")]
    OutOfRange { index: usize, min: usize, max: usize },

    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss for batch sample {batch_index}")]
    NonFiniteLoss { batch_index: usize },

    #[error("training aborted at episode {episode}, step {step}: {source}")]
    TrainingAborted {
        episode: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular system: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("return {0} is not greater than -1")]
    InvalidReturn(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Json(#[from] serde_json::Error),
}
