use thiserror::Error;

/// Errors raised by estimation, interval, test and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty sample")]
    EmptySample,

    #[error("probability level {0} outside (0, 1)")]
    InvalidProbability(f64),

    #[error("series of length {len} is too short: {needed} observations required")]
    TooShort { len: usize, needed: usize },

    #[error("invalid segment [{l}, {m}] for series of length {len}")]
    InvalidSegment { l: usize, m: usize, len: usize },

    /// A self-normalizer or dispersion is exactly zero, so the pivot is undefined.
    #[error("degenerate {what} (center {center})")]
    Degenerate { what: &'static str, center: f64 },

    #[error("no critical value for {0}")]
    MissingCriticalValue(String),

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable category for structured output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::InvalidProbability(_) => "validation",
            Error::EmptySample | Error::TooShort { .. } | Error::InvalidSegment { .. } => {
                "insufficient_data"
            }
            Error::Degenerate { .. } => "degenerate",
            Error::MissingCriticalValue(_) => "missing_critical_value",
            Error::Csv { .. } => "input_format",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
