use alloc::string::String;

/// Errors raised by the optimization toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A point has the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// A coordinate falls outside its dimension's bounds.
    #[error("coordinate {dim} = {value} is out of bounds")]
    OutOfBounds { dim: usize, value: f64 },
    /// The labeled data contains only one class.
    #[error("degenerate classification problem: {positives} positives out of {total}")]
    SingleClass { positives: usize, total: usize },
    /// The operation is not available for this input (e.g. gradients of a forest).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
