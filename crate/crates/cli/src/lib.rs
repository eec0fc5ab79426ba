//! Command-line front end: knapsack solves, oracle sweeps and topology runs.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const DEGENERATE: u8 = 2;
    pub const DUAL_BOUNDARY: u8 = 3;
    pub const NOT_CONVERGED: u8 = 4;
    /// `oracle-check` found a unique-status solve that disagrees with brute force.
    pub const MISMATCH: u8 = 5;
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: exit::INPUT,
            error: error.into(),
        }
    }

    pub fn with_code(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
