use std::path::Path;

use sample_regularity::Error as CoreError;

/// Failure of a subcommand, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Input data that cannot be used: bad trace or CSV files, mismatched
    /// runs, degenerate statistics.
    #[error("data error: {0}")]
    Data(String),

    /// Training divergence or failure to write outputs.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub(crate) fn write(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::RunAborted(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Attaches the offending path to a core error.
pub(crate) fn at(path: &Path) -> impl Fn(CoreError) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}
