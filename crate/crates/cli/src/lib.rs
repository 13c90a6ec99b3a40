//! Library side of the `ctstl` command-line tool: problem files, artifact
//! writers and the three subcommands. `main.rs` only parses arguments.

pub mod gradcheck;
pub mod monitor;
pub mod output;
pub mod plot;
pub mod problem;
pub mod solve;

use std::process::ExitCode;

/// Why a subcommand stopped. Bad input exits with 2, a check or solve that
/// ran but did not succeed exits with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

impl From<problem::ProblemError> for CliError {
    fn from(e: problem::ProblemError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub(crate) fn read_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot read {}: {e}", path.display()))
}

pub(crate) fn write_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("cannot write {}: {e}", path.display()))
}
