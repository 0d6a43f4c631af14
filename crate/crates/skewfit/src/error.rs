//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by dataset handling, model fitting, and the experiment
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column {0:?} not found in header")]
    UnknownLabelColumn(String),

    #[error("no rows left after dropping incomplete records")]
    EmptyAfterCleaning,

    #[error("non-numeric feature value {value:?} in column {column:?} (row {row})")]
    BadFeatureValue {
        value: String,
        column: String,
        row: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("scores must contain at least one positive and one negative label")]
    SingleClassScores,

    #[error("requested {k} folds for {n} samples")]
    BadFoldCount { k: usize, n: usize },

    #[error("split left an empty {0} side")]
    EmptySplit(&'static str),

    #[error("sample weights must be finite and non-negative (index {0})")]
    BadWeight(usize),

    #[error("all sample weights are zero")]
    AllZeroWeights,

    #[error("minority class has {0} samples; SMOTE needs at least 2")]
    TooFewMinority(usize),

    #[error("kernel width must be positive, got {0}")]
    BadKernelWidth(f64),

    #[error("ridge system is singular at lambda = {0}")]
    SingularSystem(f64),

    #[error("invalid experiment config: {0}")]
    BadConfig(String),

    #[error("every grid cell failed to fit:\n{0}")]
    GridExhausted(String),

    #[error("no results to report")]
    EmptyResults,
}

pub type Result<T> = std::result::Result<T, Error>;
