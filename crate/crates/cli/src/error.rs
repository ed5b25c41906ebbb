use std::fmt;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable bundle or unknown spec.
    Usage(String),
    /// Input data failed validation; details already printed.
    Validation,
    /// At least one calibration failed and `--keep-going` was not given.
    Calibration(String),
    /// Writing outputs failed.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation => 2,
            CliError::Calibration(_) => 3,
            CliError::Usage(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation => write!(f, "validation failed"),
            CliError::Calibration(m) => write!(f, "calibration failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
