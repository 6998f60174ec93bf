use std::fmt;
use std::path::PathBuf;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, message: String },
    Verify(String),
    Invariant(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, err: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io { path, message } => {
                write!(f, "i/o error on {}: {message}", path.display())
            }
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
            CliError::Invariant(m) => write!(f, "invariant breach: {m}"),
        }
    }
}
