use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch, expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("{op}: non-finite value in result")]
    NonFinite { op: &'static str },
    #[error("{op}: invalid argument: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("gradient check: closure is not deterministic (two forward passes disagree: {first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },
    #[error("backward called on a node that does not require grad")]
    NoGradient,
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

pub(crate) fn shape_err(op: &'static str, expected: impl Into<String>, got: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        expected: expected.into(),
        got: format!("{got:?}"),
    }
}
