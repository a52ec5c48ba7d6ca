use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    SelftestFailed = 1,
    Config = 2,
    Io = 3,
    Stage = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Io,
            message: message.into(),
        }
    }

    pub fn selftest(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::SelftestFailed,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<turbkit::Error> for CliError {
    fn from(e: turbkit::Error) -> Self {
        use turbkit::Error as E;
        let code = match &e {
            E::Stage { .. } => ExitCode::Stage,
            E::Io(_) | E::Format(_) | E::Json(_) => ExitCode::Io,
            _ => ExitCode::Config,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
