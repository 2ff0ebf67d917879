//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not conform for an operation. Reports both shapes.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A caller violated an API precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A value is outside its permitted range.
    #[error("out of range: {0}")]
    Range(String),

    /// Training aborted (non-finite loss or gradient).
    #[error("training error: {0}")]
    Train(String),

    /// Invalid generator or run parameter.
    #[error("parameter error: {0}")]
    Param(String),

    /// The requested quantity cannot be recovered from the given inputs.
    #[error("unrecoverable: {0}")]
    Unrecoverable(String),

    /// A file does not match the expected binary format.
    #[error("format error: {0}")]
    Format(String),

    /// A file is shorter than its declared payload.
    #[error("size error at byte {offset}: expected {expected} more bytes, found {actual}")]
    Size {
        offset: u64,
        expected: u64,
        actual: u64,
    },

    /// Checkpoint model kind does not match the requested loader.
    #[error("kind error: {0}")]
    Kind(String),

    /// Model and data dimensions disagree.
    #[error("dimension error: {0}")]
    Dim(String),

    /// Bad configuration file or key.
    #[error("config error: {0}")]
    Config(String),

    /// A CSV input is missing a required column.
    #[error("missing column: {0}")]
    Column(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
