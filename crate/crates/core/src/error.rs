use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("index {index} exceeds direction horizon {horizon}")]
    HorizonExceeded { index: i64, horizon: u64 },
    #[error("phase {0} is outside [0, 1)")]
    InvalidPhase(String),
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("cover infeasible: {0}")]
    CoverInfeasible(String),
    #[error("site ({m}, {n}) lies outside the configuration window")]
    OutOfWindow { m: i64, n: i64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("no exact entropy path: {0}")]
    UnsupportedExact(String),
    #[error("unsupported sampler: {0}")]
    UnsupportedSampler(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("trivial directional Pinsker algebra must be declared explicitly")]
    DeclarationMissing,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
