//! Scenario runner for the `qrf-core` laboratory.

pub mod commands;
pub mod scenario;

pub use commands::{cmd_game, cmd_sweep, cmd_verify, sweep_csv, ExitStatus, Overrides};
pub use scenario::{ResultRecord, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(qrf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Sorts core errors into configuration problems and everything else.
    pub fn from_core(e: qrf_core::Error) -> Self {
        match e {
            qrf_core::Error::Configuration(m) => CliError::Config(m),
            qrf_core::Error::EmptySector { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::Configuration,
            CliError::Core(qrf_core::Error::Indeterminate(_)) => ExitStatus::Ambiguous,
            CliError::Core(_) | CliError::Io(_) => ExitStatus::PropertyFailure,
        }
    }
}

impl From<qrf_core::Error> for CliError {
    fn from(e: qrf_core::Error) -> Self {
        CliError::from_core(e)
    }
}
