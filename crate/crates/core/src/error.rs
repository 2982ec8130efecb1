use thiserror::Error;

/// Errors raised by the estimators, tuning routines and file formats.
#[derive(Debug, Error)]
pub enum NtsdrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numerical failure in {context}: condition number {condition:e}")]
    IllConditioned { context: String, condition: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("tuning failed: {0}")]
    TuningFailure(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<NtsdrError>,
    },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NtsdrError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        NtsdrError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than estimator failure.
    pub fn is_validation(&self) -> bool {
        match self {
            NtsdrError::InvalidArgument(_)
            | NtsdrError::DimensionMismatch { .. }
            | NtsdrError::IndexOutOfRange { .. }
            | NtsdrError::Validation { .. }
            | NtsdrError::Format(_)
            | NtsdrError::Json(_) => true,
            NtsdrError::Sample { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, NtsdrError>;

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        Err(NtsdrError::IndexOutOfRange { index, len })
    } else {
        Ok(())
    }
}

pub(crate) fn check_dim(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(NtsdrError::DimensionMismatch {
            context: context.to_string(),
            expected,
            got,
        })
    } else {
        Ok(())
    }
}
