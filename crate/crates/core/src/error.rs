//! Error type shared by all library modules.

use std::fmt;

/// Errors produced by design construction, configuration validation and
/// simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    InvalidArgument(String),
    /// Parameters are individually valid but jointly admit no design
    /// (non-Hurwitz gains, empty admissible interval, gain below its bound).
    InfeasibleDesign(String),
    /// A simulated quantity left the representable range.
    NumericOverflow {
        /// Simulation time at which the overflow was detected.
        time: f64,
        /// Sample-path index, when the failure happened inside an ensemble.
        path: Option<u64>,
        what: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InfeasibleDesign(msg) => write!(f, "infeasible design: {msg}"),
            Error::NumericOverflow { time, path, what } => match path {
                Some(p) => write!(f, "numeric overflow at t={time} on path {p}: {what}"),
                None => write!(f, "numeric overflow at t={time}: {what}"),
            },
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a sample-path index to an overflow error raised inside a path.
    pub(crate) fn with_path(self, path_index: u64) -> Self {
        match self {
            Error::NumericOverflow { time, what, .. } => Error::NumericOverflow {
                time,
                path: Some(path_index),
                what,
            },
            other => other,
        }
    }
}
