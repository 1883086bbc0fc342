//! Crate-wide error type.
//!
//! Every fallible operation in the library funnels into [`Error`]; the CLI
//! maps variants onto process exit codes (invalid config = 2, training
//! divergence = 3, I/O = 4).

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A gradient tape was asked to run a second backward pass.
    TapeConsumed,
    /// An adjoint or loss value stopped being finite during backpropagation.
    NonFiniteAdjoint { what: String },
    /// A recorded division hit a denominator below the safe magnitude.
    DivisionByNearZero { magnitude: f64 },
    /// Array or vector dimensions do not line up.
    ShapeMismatch { context: String },
    /// Training loss became non-finite at the given iteration.
    Divergence { iteration: usize },
    /// A simulated trajectory left the representable range.
    TrajectoryEscape { time: f64 },
    /// Two trajectories that must share a time grid do not.
    GridMismatch { context: String },
    /// A value was requested outside the interval covered by the data.
    OutOfDomain { t: f64, t_min: f64, t_max: f64 },
    /// A config file failed validation; `field` names the offending key.
    InvalidConfig { field: String, reason: String },
    /// No registered system has this name.
    UnknownSystem { name: String },
    /// A checkpoint or CSV file could not be parsed.
    MalformedFile { path: String, reason: String },
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TapeConsumed => {
                write!(f, "gradient tape already consumed by a backward pass")
            }
            Error::NonFiniteAdjoint { what } => {
                write!(f, "non-finite value during backpropagation: {what}")
            }
            Error::DivisionByNearZero { magnitude } => {
                write!(
                    f,
                    "recorded division by near-zero value (|den| = {magnitude:e})"
                )
            }
            Error::ShapeMismatch { context } => write!(f, "shape mismatch: {context}"),
            Error::Divergence { iteration } => {
                write!(
                    f,
                    "training diverged: non-finite loss at iteration {iteration}"
                )
            }
            Error::TrajectoryEscape { time } => {
                write!(f, "trajectory left the finite range at t = {time}")
            }
            Error::GridMismatch { context } => write!(f, "time-grid mismatch: {context}"),
            Error::OutOfDomain { t, t_min, t_max } => {
                write!(f, "t = {t} outside the covered interval [{t_min}, {t_max}]")
            }
            Error::InvalidConfig { field, reason } => {
                write!(f, "invalid config: field `{field}`: {reason}")
            }
            Error::UnknownSystem { name } => write!(f, "unknown system `{name}`"),
            Error::MalformedFile { path, reason } => {
                write!(f, "malformed file {path}: {reason}")
            }
            Error::Io { path, source } => write!(f, "i/o error on {path}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code the CLI should report for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig { .. } | Error::UnknownSystem { .. } => 2,
            Error::Divergence { .. } => 3,
            Error::Io { .. } | Error::MalformedFile { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
