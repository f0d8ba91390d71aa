use irsbeam::ConfigErrors;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read configuration: {0}")]
    Parse(String),

    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}
