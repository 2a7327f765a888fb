use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid rank thresholds: tau_abs = {tau_abs}, tau_rel = {tau_rel}")]
    InvalidThresholds { tau_abs: f64, tau_rel: f64 },

    #[error("invalid map specification: {0}")]
    InvalidSpec(String),

    #[error("embedding matrix is not semi-orthogonal: ||Q^T Q - I|| = {defect}")]
    NotSemiOrthogonal { defect: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (depth cap {max_depth})")]
    QuadratureFailure { a: f64, b: f64, max_depth: u32 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("component {component} has rank {rank}, operation requires rank {required}")]
    WrongComponentRank {
        component: usize,
        rank: usize,
        required: String,
    },

    #[error("no such component: {0}")]
    NoSuchComponent(usize),

    #[error("empty sample set")]
    EmptyInput,

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid flow specification: {0}")]
    InvalidFlow(String),

    #[error("flow start is singular: |xi^T Du(x)| = {measured} <= eps_stop = {eps_stop}")]
    SingularStart { measured: f64, eps_stop: f64 },

    #[error("map evaluation failed at {point:?}: {reason}")]
    EvalFailure { point: Vec<f64>, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
