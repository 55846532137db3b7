use crate::model::MetricKind;

/// Errors produced anywhere in the evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("sentence is empty after tokenization: {0:?}")]
    EmptySentence(String),

    #[error("missing metric {0} required for aggregation")]
    MissingMetric(MetricKind),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("duplicate token {0:?}")]
    DuplicateToken(String),

    #[error("invalid value at line {line}: {message}")]
    Value { line: usize, message: String },

    #[error("no in-vocabulary tokens among {0:?}")]
    AllOov(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("rank vectors cover different models: {0}")]
    KeyMismatch(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn value(line: usize, message: impl Into<String>) -> Self {
        Error::Value {
            line,
            message: message.into(),
        }
    }
}
