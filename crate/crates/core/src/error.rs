use alloc::string::String;
use core::fmt;

/// Error type shared by the solver, scheme executor, and analysis layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on user-supplied data was violated.
    InvalidArgument(String),
    /// The adaptive solver could not continue (step-size underflow or step
    /// budget exhausted). Carries the last time it reached successfully.
    SolverFailure { message: String, last_time: f64 },
    /// Scheme DSL syntax error with 1-based line/column position.
    Parse { line: usize, column: usize, message: String },
    /// A scheme failed the consistency check required by the operation.
    InconsistentScheme(String),
    /// Invariant breakage that should be unreachable after validation.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SolverFailure { message, last_time } => {
                write!(f, "solver failure at t = {last_time}: {message}")
            }
            Error::Parse { line, column, message } => {
                write!(f, "parse error at {line}:{column}: {message}")
            }
            Error::InconsistentScheme(msg) => write!(f, "inconsistent scheme: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl core::error::Error for Error {}
