use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand sizes do not line up.
    DimensionMismatch { expected: usize, found: usize },
    NotSquare { rows: usize, cols: usize },
    /// A NaN or infinite value reached a constructor or the integrator.
    NonFinite,
    /// A matrix that must be strictly positive (or non-negative) is not.
    NotPositive,
    ZeroVector,
    InvalidArgument(&'static str),
    /// An iterative method did not meet its tolerance.
    NoConvergence { iterations: usize },
    /// The explicit integrator diverged; the step size is too large.
    Instability { step: usize },
    IndexOutOfRange { index: usize, len: usize },
    Parse { line: usize, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotSquare { rows, cols } => write!(f, "matrix is not square ({rows}x{cols})"),
            Error::NonFinite => f.write_str("non-finite value"),
            Error::NotPositive => f.write_str("matrix entries must be positive"),
            Error::ZeroVector => f.write_str("zero vector"),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::NoConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::Instability { step } => {
                write!(f, "integration became unstable at step {step}; reduce alpha")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
