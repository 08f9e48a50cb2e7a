//! Error type shared by every engine module.

use thiserror::Error;

/// Failures raised by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("series order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("series is not a unit (constant term is zero)")]
    NonUnit,
    #[error("invalid scalar literal `{0}`")]
    ScalarSyntax(String),
    #[error("invalid generator index {index} (have {count})")]
    InvalidGenerator { index: usize, count: usize },
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("slot {slot} out of range for a tensor with {len} slots")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("metric error: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
