use alloc::string::String;

use crate::channel::Variant;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid channel model: {0}")]
    InvalidModel(String),

    #[error("enumeration too large: {count} entries exceed the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variant mismatch: expected {expected}, got {got}")]
    VariantMismatch { expected: Variant, got: Variant },

    #[error("unknown game variant `{0}`")]
    UnknownVariant(String),

    #[error("input contains a non-finite value")]
    NonFinite,

    #[error("water-level bisection did not converge after {0} iterations")]
    BisectionFailed(usize),

    #[error("no lower bound is defined for the full-information game")]
    NoLowerBound,

    #[error("best-response inner solve did not converge for user {user}")]
    InnerSolveFailed { user: usize },

    #[error("interference observation {value} is not in the support of user {user}")]
    OutsideSupport { user: usize, value: f64 },

    #[error("strategy set is empty")]
    EmptyStrategySet,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}
