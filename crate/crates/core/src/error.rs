use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("precision mismatch: {0}")]
    Precision(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid quadratic ring: {0}")]
    InvalidRing(String),
    #[error("invalid subgroup spec: {0}")]
    Spec(String),
    #[error("resource limit exceeded at modulus {ell}^{prec}: {detail}")]
    Resource { ell: u64, prec: u32, detail: String },
    #[error("partition integrity: {0}")]
    Partition(String),
    #[error("internal consistency: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
