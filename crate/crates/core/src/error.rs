use thiserror::Error;

/// Errors produced by the solvers and model constructors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid simplex point: {0}")]
    InvalidSimplex(String),

    #[error("region index {index} out of range for {n} regions")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("active set must be nonempty")]
    EmptyActiveSet,

    #[error("instance is missing `{0}`, required by this solver")]
    MissingField(&'static str),

    #[error("newton iteration did not converge at t = {t:e}: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence {
        t: f64,
        residual: f64,
        iterations: usize,
        last_x: Vec<f64>,
        last_y: Vec<f64>,
    },

    #[error("sample batch size must be positive")]
    EmptyBatch,

    #[error("invalid shift: shape parameter {shape} in region {region} is not positive")]
    InvalidShift { region: usize, shape: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite oracle output at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("linear program failed: {reason}")]
    LpFailure { reason: String, log: Vec<String> },

    #[error("{msg} at line {line}, column {column}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
