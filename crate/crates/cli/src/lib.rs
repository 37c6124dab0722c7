//! Library side of the `sambe` command-line tool: configuration, output files, the
//! per-figure commands and the acceptance suite.

pub mod accept;
pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Failures surfaced by the command-line tool, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(sambe_core::Error),
    Io(String),
    /// At least one acceptance criterion failed.
    Acceptance(String),
}

impl CliError {
    /// 0 success, 1 I/O, 2 configuration, 3 numerical failure, 4 acceptance failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) if !e.is_numerical() => 2,
            CliError::Core(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Acceptance(msg) => write!(f, "acceptance failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<sambe_core::Error> for CliError {
    fn from(e: sambe_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Io("disk".into()).exit_code(), 1);
        assert_eq!(CliError::Config("key".into()).exit_code(), 2);
        assert_eq!(CliError::Core(sambe_core::Error::InvalidInput("eps".into())).exit_code(), 2);
        assert_eq!(CliError::Acceptance("1 failed".into()).exit_code(), 4);
    }
}
