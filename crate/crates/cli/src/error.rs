//! CLI error type and its process exit codes.

use std::fmt;

use air_core::AirError;

/// Exit code for configuration problems: unreadable file, parse error,
/// out-of-range field.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for solver divergence.
pub const EXIT_DIVERGED: i32 = 3;
/// Exit code for everything else (I/O, internal errors).
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// The configuration (or a CLI flag standing in for one) is invalid.
    Config(String),
    /// An error surfaced by the core library at run time.
    Air(AirError),
    /// An I/O failure outside the core library, e.g. writing artifacts.
    Io(std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Wrap a core validation error raised while interpreting the config,
    /// so it keeps the config exit code.
    pub fn from_config_error(err: AirError) -> Self {
        CliError::Config(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Air(AirError::Divergence { .. }) => EXIT_DIVERGED,
            CliError::Air(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Air(err) => write!(f, "{err}"),
            CliError::Io(err) => write!(f, "{err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<AirError> for CliError {
    fn from(err: AirError) -> Self {
        CliError::Air(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}
