use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid of {steps} steps x dt {dt} does not span horizon {horizon}")]
    GridMismatch { steps: usize, dt: f64, horizon: f64 },

    #[error("cannot coarsen a grid with an odd number of steps ({0})")]
    OddSteps(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("time {t} lies outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error(
        "implicit step did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    QuadratureFailed { requested: f64, achieved: f64 },

    #[error("scheme `{scheme}` does not support problem `{problem}`")]
    UnsupportedScheme {
        scheme: &'static str,
        problem: String,
    },

    #[error("malformed initial array: {0}")]
    MalformedInitialArray(String),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
