use std::fmt;
use std::path::PathBuf;

/// Errors surfaced by the CLI, split by the exit code they map to: usage
/// problems (bad flag combinations, missing data) exit 2, everything else
/// exits 1.
#[derive(Debug)]
pub enum CliError {
    /// The invocation itself is wrong: invalid flag combination or a data
    /// directory that does not hold the expected files.
    Usage(String),
    /// The run started but failed.
    Runtime(String),
    Io { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            detail: err.to_string(),
        }
    }

    /// Process exit code this error maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
            CliError::Io { path, detail } => write!(f, "{}: {detail}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<actgrad_core::error::Error> for CliError {
    fn from(e: actgrad_core::error::Error) -> Self {
        // Missing/corrupt data files are invocation problems, not crashes.
        match &e {
            actgrad_core::error::Error::Io { .. }
            | actgrad_core::error::Error::FileFormat { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
