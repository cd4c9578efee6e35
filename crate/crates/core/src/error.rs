use thiserror::Error;

/// Errors raised by the grid, solver, transport and quantization routines.
///
/// Numeric payloads are stored as `f64` so the error type stays independent
/// of the scalar the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VfdError {
    #[error("grid needs at least 8 nodes, got {0}")]
    GridTooSmall(usize),

    #[error("grid function has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operands live on different grids ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("value at node {index} is not strictly positive and finite ({value})")]
    NonPositive { index: usize, value: f64 },

    #[error("density has mass {mass}, expected 1")]
    MassMismatch { mass: f64 },

    #[error("rho is not strictly positive (minimum {min} on the audit grid)")]
    RhoNotPositive { min: f64 },

    #[error("Newton iteration stalled at t = {t} (residual {residual} after {iterations} iterations, dt = {dt})")]
    NewtonDivergence {
        t: f64,
        dt: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("transport map lost strict monotonicity at index {index} (increment {increment})")]
    MonotonicityLoss { index: usize, increment: f64 },

    #[error("perturbation is not mean-free (integral {integral})")]
    NotMeanFree { integral: f64 },

    #[error("series value {value} at t = {t} is not positive")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("not enough samples: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("points {left} and {right} collided (gap {gap})")]
    PointCollision { left: usize, right: usize, gap: f64 },

    #[error("singular linear system")]
    SingularSystem,
}

pub type Result<T> = std::result::Result<T, VfdError>;
