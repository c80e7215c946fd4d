use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient vectors must have at least one entry")]
    EmptyVector,

    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("exponent p = {0} is invalid: it must be finite and at least 1")]
    InvalidExponent(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("index arithmetic overflow: {0}")]
    Overflow(String),

    #[error("index {index} is outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("position map is not strictly increasing at k = {0}")]
    NonMonotone(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("pi({m}) = {value} exceeds the ambient dimension {dim}")]
    DomainClosure { m: usize, value: usize, dim: usize },

    #[error("exact enumeration supports at most {cap} Rademacher terms, got {n}")]
    ExactCapExceeded { n: usize, cap: usize },

    #[error("q-schedule has {len} entries but the Rademacher sum has {needed} terms")]
    ScheduleTooShort { len: usize, needed: usize },

    #[error("the zero vector is not a valid input here")]
    ZeroVector,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Io(String),
}
