use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),

    #[error("axis {axis}: {reason}")]
    InvalidAxis { axis: usize, reason: String },

    #[error("axis {axis} out of range for a {dim}-dimensional mesh")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("grid functions live on different meshes")]
    MeshMismatch,

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("linear solve did not converge after {} iterations (relative residual {:.3e})", .0.iterations, .0.residual)]
    NotConverged(SolveReport),

    #[error("solver failure at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time level not available: {0}")]
    MissingLevel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("observed order {order:.3} at rung M={points} is below the required {min}")]
    OrderCheck { points: usize, order: f64, min: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
