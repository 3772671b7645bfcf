//! Library side of the `fpv` command: file formats, reports and the
//! subcommand implementations. `main.rs` only parses arguments.

use std::fmt;

pub mod commands;
pub mod files;
pub mod json;
pub mod report;

/// Exit codes shared by all subcommands.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID: i32 = 1;
    /// `lambda2 = 1`: the halt state is never reached from `phi`.
    pub const TRAPPED: i32 = 2;
    pub const CENSORED: i32 = 3;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: exit::INVALID,
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

impl From<fpv_core::Error> for CliError {
    fn from(e: fpv_core::Error) -> Self {
        let code = match e {
            fpv_core::Error::Censoring { .. } => exit::CENSORED,
            _ => exit::INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// What a subcommand writes to standard output, and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    pub fn ok(stdout: String) -> Self {
        Self {
            stdout,
            code: exit::OK,
        }
    }
}
