//! Command-line driver: configuration loading, the five subcommands and
//! their file formats.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] zpf_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 config-invalid, 3 no-solution or band error, 4 statistical
    /// precondition, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use zpf_core::Error::*;
        match self {
            CliError::Core(InvalidConfig { .. }) => 2,
            CliError::Core(NoSolution(_) | Band(_) | Domain { .. }) => 3,
            CliError::Core(UndefinedRatio(_) | NotPresent(_) | InvalidArgument(_) | NotFound(_)) => 4,
            CliError::Io(_) => 1,
        }
    }
}
