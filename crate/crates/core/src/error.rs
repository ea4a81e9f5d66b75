use alloc::string::String;
use core::fmt;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cloud with zero points was supplied where at least one is required.
    EmptyCloud,
    /// A coordinate was NaN or infinite.
    NonFinite { index: usize },
    /// Fewer points are available than the operation needs.
    TooFewPoints { requested: usize, available: usize },
    /// Class id outside the synthetic shape catalogue.
    UnknownClass(usize),
    /// Neighbour count must satisfy `1 <= k < n`.
    KTooLarge { k: usize, n: usize },
    /// Operand shapes do not agree.
    DimensionMismatch { expected: usize, found: usize },
    /// Two clouds were expected to have the same number of points.
    SizeMismatch { left: usize, right: usize },
    /// Index range does not fit inside `0..len`.
    BadRange { start: usize, end: usize, len: usize },
    /// Drop count for random sampling must be below the point count.
    BadCount { count: usize, n: usize },
    /// The eigenvalue iteration did not converge.
    ConvergenceFailure,
    /// A configuration value is out of its valid domain.
    InvalidConfig(String),
    /// A label is missing or not below the class count.
    BadLabel { label: Option<usize>, classes: usize },
    /// Training or evaluation was asked to run on no data.
    EmptyDataset,
    /// Serialized model header is not one this version understands.
    VersionMismatch(String),
    /// Serialized model payload is truncated or inconsistent.
    CorruptModel(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => f.write_str("point cloud is empty"),
            Error::NonFinite { index } => write!(f, "point {index} has a non-finite coordinate"),
            Error::TooFewPoints { requested, available } => {
                write!(f, "requested {requested} points but only {available} available")
            }
            Error::UnknownClass(id) => write!(f, "unknown shape class {id}"),
            Error::KTooLarge { k, n } => write!(f, "K={k} must satisfy 1 <= K < n={n}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SizeMismatch { left, right } => {
                write!(f, "point count mismatch: {left} vs {right}")
            }
            Error::BadRange { start, end, len } => {
                write!(f, "range {start}..{end} is not inside 0..{len}")
            }
            Error::BadCount { count, n } => {
                write!(f, "cannot drop {count} of {n} points")
            }
            Error::ConvergenceFailure => f.write_str("eigenvalue iteration did not converge"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::BadLabel { label: Some(l), classes } => {
                write!(f, "label {l} is not below class count {classes}")
            }
            Error::BadLabel { label: None, .. } => f.write_str("cloud has no label"),
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::VersionMismatch(msg) => write!(f, "model version mismatch: {msg}"),
            Error::CorruptModel(msg) => write!(f, "corrupt model payload: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
