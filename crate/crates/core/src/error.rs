use std::path::PathBuf;

/// Errors raised anywhere in the training, evaluation and I/O pipeline.
#[derive(Debug, thiserror::Error)]
pub enum SuvrError {
    #[error("vector norm {norm:e} is below the 1e-12 floor")]
    NormTooSmall { norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("not enough candidates: requested {requested}, only {available} available")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("cannot carve {negatives} negatives out of {positives} positives")]
    NegativesExhaustPositives { negatives: usize, positives: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("instance {index} appears more than once across query, positives and negatives")]
    OverlappingSets { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SuvrError>;

impl SuvrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SuvrError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SuvrError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        SuvrError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
