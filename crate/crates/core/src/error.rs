use thiserror::Error;

/// Errors raised by the simulation core.
///
/// Scalars are carried as `f64` regardless of the working precision so the
/// error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EscError {
    #[error("dimension mismatch in `{field}`: expected {expected}, got {got}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite value in {context} at state {state:?}")]
    NonFinite { context: String, state: Vec<f64> },

    #[error("non-finite Runge-Kutta stage {stage} at t = {t}")]
    Step { t: f64, stage: usize },

    #[error("nonsmooth point: coordinate {coordinate} (velocity index) = {value} is inside the guard band")]
    NonsmoothPoint { coordinate: usize, value: f64 },

    #[error("invalid horizon: t0 = {t0}, tf = {tf}, dt = {dt}")]
    InvalidHorizon { t0: f64, tf: f64, dt: f64 },

    #[error("trajectory grids differ: {0}")]
    GridMismatch(String),

    #[error("objective has no minimum value J*; Lyapunov function undefined")]
    MissingMinValue,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unknown scenario `{name}`; valid names: {valid}")]
    UnknownScenario { name: String, valid: String },
}

pub type Result<T, E = EscError> = std::result::Result<T, E>;
