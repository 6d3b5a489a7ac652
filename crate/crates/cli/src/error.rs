use std::path::Path;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    #[error("usage: {0}")]
    Usage(String),
    /// Unreadable or malformed input data, or a failed file operation (exit 3).
    #[error("data format: {0}")]
    Format(String),
    /// Numerical failure inside a computation (exit 4).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Format(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::Format(format!("{}: {err}", path.display()))
    }
}

impl From<phaseret::Error> for CliError {
    fn from(e: phaseret::Error) -> Self {
        use phaseret::Error as E;
        match e {
            E::Config(_)
            | E::InvalidInput(_)
            | E::Geometry(_)
            | E::SingularPair { .. }
            | E::MaterialOrdering { .. } => CliError::Usage(e.to_string()),
            E::Dimension(_) => CliError::Format(e.to_string()),
            E::Domain(_)
            | E::SingularSystem { .. }
            | E::InsufficientData(_)
            | E::FitFailure { .. }
            | E::UndefinedSnr => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    /// Classified by the first library error in the chain; anything else is
    /// treated as a numerical failure of the experiment.
    fn from(e: anyhow::Error) -> Self {
        let message = format!("{e:#}");
        match e.chain().find_map(|c| c.downcast_ref::<phaseret::Error>()) {
            Some(inner) => match CliError::from(inner.clone()) {
                CliError::Usage(_) => CliError::Usage(message),
                CliError::Format(_) => CliError::Format(message),
                CliError::Numerical(_) => CliError::Numerical(message),
            },
            None => CliError::Numerical(message),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
