//! Command-line pipeline: scene generation, prompt construction, prompt-head
//! training, tracking, and evaluation, tied together over JSONL files.

pub mod commands;
pub mod config;
pub mod fuzz;
pub mod io;
pub mod table;

use std::fmt;

/// Process exit codes: 0 ok, 2 input error, 3 internal invariant violation.
#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: unreadable/unwritable paths, malformed or inconsistent
    /// files, invalid flag combinations. Exit code 2.
    Input(String),
    /// A violated internal invariant. Exit code 3.
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> CliError {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<promptmot::Error> for CliError {
    fn from(e: promptmot::Error) -> CliError {
        CliError::Input(e.to_string())
    }
}
