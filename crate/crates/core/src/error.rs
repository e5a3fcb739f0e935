use thiserror::Error;

/// Errors produced by the models and block solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("scenario invariant violated: {0}")]
    Invalid(String),

    #[error("end point unreachable: distance {distance:.4} m exceeds N*d_max = {limit:.4} m")]
    Unreachable { distance: f64, limit: f64 },

    #[error("singular geometry: points coincide")]
    SingularDistance,

    #[error("phase entry {index} has modulus {modulus}, expected 1")]
    NonUnitPhase { index: usize, modulus: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("desired signal vanishes, SINR ratio undefined")]
    ZeroDesiredSignal,

    #[error("negative speed {0}")]
    NegativeSpeed(f64),

    #[error("non-positive argument to rate bound: {0}")]
    NonPositive(&'static str),

    #[error("water level bisection does not bracket the budget")]
    NonBracketing,

    #[error("infeasible expansion point: {0}")]
    InfeasibleExpansion(String),

    #[error("convex solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
