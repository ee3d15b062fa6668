use std::fmt;
use std::path::PathBuf;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two tensors that must agree in shape do not.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A single tensor has a shape the operation cannot accept.
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },
    /// A flat buffer has the wrong number of elements.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An identifier (activation name, component name, ...) is not recognized.
    UnknownKind { what: &'static str, value: String },
    /// A cached forward state does not belong to the network/parameters it is
    /// being replayed against.
    StaleCache(&'static str),
    /// A scalar or config argument is out of its documented range.
    InvalidArgument { what: &'static str, detail: String },
    /// An on-disk file does not match the expected binary layout.
    FileFormat { path: PathBuf, detail: String },
    /// I/O failure, with the path that was being touched.
    Io { path: PathBuf, detail: String },
    /// A value that must be finite is NaN or infinite.
    NonFinite { what: &'static str, index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch between {lhs:?} and {rhs:?}")
            }
            Error::InvalidShape { op, shape, reason } => {
                write!(f, "{op}: invalid shape {shape:?}: {reason}")
            }
            Error::LengthMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected {expected} elements, got {actual}"),
            Error::UnknownKind { what, value } => write!(f, "unknown {what}: {value:?}"),
            Error::StaleCache(what) => {
                write!(f, "{what}: cached forward state does not match this network")
            }
            Error::InvalidArgument { what, detail } => write!(f, "{what}: {detail}"),
            Error::FileFormat { path, detail } => {
                write!(f, "{}: {detail}", path.display())
            }
            Error::Io { path, detail } => write!(f, "{}: {detail}", path.display()),
            Error::NonFinite { what, index } => {
                write!(f, "{what}: non-finite value at index {index}")
            }
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            detail: err.to_string(),
        }
    }
}
