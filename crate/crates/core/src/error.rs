use thiserror::Error;

/// Errors produced by the turbkit pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or precondition was violated.
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs disagree on shape.
    #[error("dimension mismatch: {context} (expected {expected:?}, found {found:?})")]
    DimensionMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// A pipeline stage failed; `stage` names where.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    /// Malformed or corrupt on-disk data.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn mismatch(context: &'static str, expected: &[usize], found: &[usize]) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }

    /// Wrap this error with the name of the stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
