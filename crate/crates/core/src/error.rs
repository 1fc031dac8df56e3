use thiserror::Error;

/// Errors raised by the library. Variants map onto the failure classes the
/// CLI reports as distinct exit codes (parameter, data, numeric).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid quote on line {line}: ask {ask} < bid {bid}")]
    InvalidQuote { line: usize, bid: f64, ask: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index out of bounds: need {needed} samples, series has {available}")]
    Bounds { needed: usize, available: usize },

    #[error("division by zero price at index {index}")]
    ZeroPrice { index: usize },

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("degenerate window: max equals min ({value})")]
    DegenerateWindow { value: f64 },

    #[error("flat price at index {index}: p[t] == p[t-1]")]
    FlatPrice { index: usize },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("signal at index {index} outside tick range of length {len}")]
    Alignment { index: usize, len: usize },

    #[error("equity fell to {equity} at tick {index}")]
    MarginCall { index: usize, equity: f64 },

    #[error("no admissible candidate in grid results")]
    NoCandidate,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse classification used by front ends.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::InvalidQuote { .. } | Error::Alignment { .. } => {
                ErrorKind::Data
            }
            Error::Parameter(_) | Error::Bounds { .. } => ErrorKind::Usage,
            _ => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
