//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Shapes of the operands do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A value or flag outside the accepted range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was asked for outside the regime where it is defined
    /// (e.g. a hidden-size reduction with a nonlinear activation).
    #[error("operation out of scope: {0}")]
    OutOfScope(String),

    /// A non-finite value surfaced where the contract forbids it.
    #[error("numerical failure: {0}")]
    NonFinite(String),

    /// Corpus/vocabulary problems.
    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint has unsupported magic/version: {0}")]
    CheckpointVersion(String),

    #[error("checkpoint kind mismatch: expected {expected}, found {found}")]
    CheckpointKind { expected: String, found: String },

    #[error("checkpoint truncated: {0}")]
    CheckpointTruncated(String),

    #[error("checkpoint dimensions inconsistent: {0}")]
    CheckpointDim(String),

    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
