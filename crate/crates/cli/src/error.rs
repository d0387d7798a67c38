use std::fmt;

/// Failure of a CLI command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or unreadable configuration (exit code 2).
    Config(String),
    /// Anything that fails after the configuration was accepted (exit code 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<powermap::Error> for CliError {
    fn from(e: powermap::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub(crate) fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
