use thiserror::Error;

/// Errors raised by field construction, the solvers, and the particle engine.
#[derive(Debug, Error)]
pub enum SfpeError {
    #[error("modes per axis must be a power of two >= 4, got {0}")]
    NotPowerOfTwo(usize),

    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDim(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("component mismatch: expected {expected}, got {got}")]
    ComponentMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel is not a probability density: integral {integral:.3e}, min value {min:.3e}")]
    Normalization { integral: f64, min: f64 },

    #[error("level {level} outside resolved range [-1, {max}]")]
    LevelOutOfRange { level: i32, max: i32 },

    #[error("time index {index} out of range (grid has {len} nodes)")]
    TimeIndexOutOfRange { index: usize, len: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("picard iteration did not converge after {iterations} iterations (last residual {last:.3e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("fixed-point map is not contracting: {0}")]
    NonContraction(String),

    #[error("particle blow-up at step {step}: displacement {displacement:.3e} exceeds L/4")]
    BlowUp { step: usize, displacement: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SfpeError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SfpeError {
    SfpeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
