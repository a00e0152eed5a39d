use core::fmt;

use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Polynomial index outside `1..=4`.
    InvalidPolynomialIndex(u8),
    /// An input that must be non-negative (or strictly positive) was not.
    InvalidInput { name: &'static str, value: f64 },
    /// A probability outside `[0, 1]` was handed to the sampler.
    ProbabilityOutOfRange(f64),
    /// A parameter set violates one of its invariants.
    InvalidParameters(String),
    /// Coefficient table text could not be parsed.
    TableParse { line: usize, message: String },
    /// A traffic-core invariant was violated during a replication.
    InvariantBreach { time_s: f64, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPolynomialIndex(i) => {
                write!(f, "polynomial index {i} is outside 1..=4")
            }
            Error::InvalidInput { name, value } => write!(f, "invalid {name}: {value}"),
            Error::ProbabilityOutOfRange(p) => write!(f, "probability {p} is outside [0, 1]"),
            Error::InvalidParameters(msg) => write!(f, "invalid parameters: {msg}"),
            Error::TableParse { line, message } => {
                write!(f, "coefficient table line {line}: {message}")
            }
            Error::InvariantBreach { time_s, message } => {
                write!(f, "invariant breach at t={time_s} s: {message}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
