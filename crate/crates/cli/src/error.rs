// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

/// Process exit codes. Usage errors exit with 2 through clap.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const DEGENERATE: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input data.
    Input(String),
    /// Flag combination that clap cannot reject on its own.
    Usage(String),
    Io(String),
    Core(selfnorm::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Core(e) if e.is_degenerate() => exit::DEGENERATE,
            CliError::Core(selfnorm::Error::NonFinite { .. }) => exit::INPUT,
            CliError::Core(_) => exit::INFEASIBLE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<selfnorm::Error> for CliError {
    fn from(e: selfnorm::Error) -> Self {
        CliError::Core(e)
    }
}
