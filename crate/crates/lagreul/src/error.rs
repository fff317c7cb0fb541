use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains non-finite samples ({context})")]
    NonFinite { context: String },

    #[error("axis {axis} out of range for dimension {d}")]
    AxisOutOfRange { axis: usize, d: usize },

    #[error("time index {index} out of range (have {len} samples)")]
    TimeIndexOutOfRange { index: usize, len: usize },

    #[error("time domain error: {0}")]
    TimeDomain(String),

    #[error("flow map inversion failed to converge at node {node}: residual {residual:.3e} after {iters} iterations")]
    InversionDiverged {
        node: usize,
        residual: f64,
        iters: usize,
    },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("solver state outside the admissible ball: sup |grad d| = {grad_sup:.3e} >= 0.5")]
    BallViolation { grad_sup: f64 },

    #[error("Picard iteration did not converge within {iters} iterations (last distance {last_distance:.3e})")]
    NonConvergence {
        iters: usize,
        last_distance: f64,
        trace: Box<crate::solver::IterationTrace>,
    },

    #[error("quadrature did not converge: {0}")]
    QuadratureInconclusive(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("probe error: {0}")]
    Probe(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
