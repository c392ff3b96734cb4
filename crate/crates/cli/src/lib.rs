//! Command-line front end: configuration, subcommands and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod io;
pub mod plot;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{run, Command, Options};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("hypothesis {label} violated: {message}")]
    Hypothesis { label: &'static str, message: String },
    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{}: fingerprint {found} does not match {expected}", path.display())]
    FingerprintMismatch {
        expected: String,
        found: String,
        path: PathBuf,
    },
}

impl CliError {
    /// 1 usage or config, 2 hypothesis violation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hypothesis { .. } => 2,
            CliError::Numerical { .. } => 3,
            _ => 1,
        }
    }
}
