use thiserror::Error;

/// Errors raised by grid construction, quadrature and the verification drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("box does not contain a full grid cell of the domain")]
    EmptyIntersection,

    #[error("level {level} is finer than the grid spacing {spacing}")]
    ResolutionExceeded { level: i32, spacing: f64 },

    #[error("weight evaluated to a non-positive or non-finite value {value} at {point:?}")]
    NonPositiveValue { value: f64, point: Vec<f64> },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("point {0:?} or one of its difference stencil points lies outside the domain")]
    OutOfDomain(Vec<f64>),

    #[error("level {k_max} puts the band support beyond the Nyquist frequency {nyquist}")]
    NyquistExceeded { k_max: u32, nyquist: f64 },

    #[error("weight sequence has levels 0..={have}, but level {need} is required")]
    MissingLevels { have: usize, need: usize },

    #[error("dilation clipped {fraction:.4} of the L1 mass (limit 0.01)")]
    ClippingExcessive { fraction: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
