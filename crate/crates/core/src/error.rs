use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("belief is on the simplex boundary (min component {min:e} < {floor:e})")]
    BoundaryBelief { min: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("nonpositive jump rate {value:e} for state {state} at t = {time}")]
    NonPositiveRate { state: usize, time: f64, value: f64 },

    #[error(
        "belief coordinate {state} fell to {value:e} at t = {time} before a new state entered"
    )]
    InteriorityLost { state: usize, time: f64, value: f64 },

    #[error("skeleton exceeded {limit} phases")]
    PhaseLimit { limit: usize },

    #[error("horizon {horizon} is below the last breakpoint {breakpoint}")]
    HorizonTooShort { horizon: f64, breakpoint: f64 },

    #[error("law is mass-incomplete for state {state}: F(inf) = {got}, prior = {expected}")]
    MassIncomplete {
        state: usize,
        got: f64,
        expected: f64,
    },

    #[error("type {r} outside support [{low}, {high}]")]
    TypeOutOfSupport { r: f64, low: f64, high: f64 },

    #[error("type {r} is excluded (cutoff {cutoff} <= 0)")]
    ExcludedType { r: f64, cutoff: f64 },

    #[error("regularity violation: {0}")]
    Regularity(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
