//! Library surface of the `eteso` command-line tool: the manifest schema,
//! the deterministic serializers and the command implementations.

use std::fmt;

pub mod commands;
pub mod manifest;
pub mod output;

pub use manifest::Manifest;

/// Environment variable consulted for the worker count when --workers is
/// absent.
pub const WORKERS_ENV: &str = "ETESO_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Core(eteso_core::Error),
    Manifest(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Manifest(msg) => write!(f, "manifest: {msg}"),
            CliError::Io(msg) => write!(f, "io: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<eteso_core::Error> for CliError {
    fn from(e: eteso_core::Error) -> Self {
        CliError::Core(e)
    }
}
