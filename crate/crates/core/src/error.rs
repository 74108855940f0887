use alloc::string::String;
use core::fmt;

/// Errors surfaced by the algorithms in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    Config(String),
    /// A vector or matrix did not have the expected length.
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A NaN or infinity showed up where finite values are required.
    Numerical(String),
    /// A vehicle id that is not part of the scene.
    UnknownVehicle(u32),
    /// A controller produced a non-finite action.
    NonFiniteAction { vehicle: u32 },
    /// An operation needing at least one sample got none.
    EmptyBatch(&'static str),
    /// The constraint set of a tabular problem is empty.
    Infeasible(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            actual,
        }
    }

    pub(crate) fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Self::dim(what, expected, actual))
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Dimension {
                what,
                expected,
                actual,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {actual}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::UnknownVehicle(id) => write!(f, "unknown vehicle id {id}"),
            Error::NonFiniteAction { vehicle } => {
                write!(f, "non-finite action for vehicle {vehicle}")
            }
            Error::EmptyBatch(what) => write!(f, "empty batch: {what}"),
            Error::Infeasible(msg) => write!(f, "infeasible constraint set: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
