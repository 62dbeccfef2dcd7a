//! Command-line front end for the `dosm-core` testbed: strict JSON run
//! configurations, seeded experiment execution, horizon sweeps, self-check
//! suites, and SVG rendering of regret traces.

use std::fmt;

pub mod commands;
pub mod config;
pub mod plot;
pub mod runner;

/// Failure classes, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed configuration or input data; exits with code 2.
    Invalid(String),
    /// Failure while executing an otherwise valid request; exits with code 1.
    Runtime(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
