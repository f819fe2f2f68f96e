use thiserror::Error;

/// Errors raised by the estimation, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown kernel `{name}` (available: {available})")]
    UnknownKernel { name: String, available: String },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:e} > tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite state at fine step {step}")]
    NonFiniteState { step: usize },

    #[error("intensity {value} at state {state} exceeds the thinning bound {bound}")]
    IntensityBound { value: f64, state: f64, bound: f64 },

    #[error("insufficient local data at x = {x}: {reason}")]
    InsufficientLocalData { x: f64, reason: String },

    #[error("no local occupation at x = {x}")]
    NoLocalOccupation { x: f64 },

    #[error("flat diffusion: MSE bandwidth undefined")]
    FlatDiffusion,

    #[error("{failed} of {total} replicates failed at x = {x}")]
    TooManyFailures { x: f64, failed: usize, total: usize },

    #[error("data error at line {line}: {reason}")]
    Data { line: usize, reason: String },

    #[error("config error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn insufficient(x: f64, reason: impl Into<String>) -> Self {
        Error::InsufficientLocalData {
            x,
            reason: reason.into(),
        }
    }
}
