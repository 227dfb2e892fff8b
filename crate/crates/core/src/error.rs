use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("DFT grid of {samples} points cannot resolve frequencies up to {max_freq} (need at least {required})")]
    InsufficientGrid {
        samples: usize,
        max_freq: usize,
        required: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("out-of-band Fourier mass {mass:e} exceeds {tolerance:e}")]
    Aliasing { mass: f64, tolerance: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
