use thiserror::Error;

use crate::program::Cone;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid cone {0:?}")]
    InvalidCone(Cone),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("psd block of order {order} exceeds the cap of {cap}")]
    PsdTooLarge { order: usize, cap: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
