use thiserror::Error;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A check ran and did not pass. Exit 1.
    #[error("{0}")]
    Check(String),
    /// Bad configuration, arguments or input files. Exit 2.
    #[error("config error: {0}")]
    Config(String),
    /// A run produced a non-finite value. Exit 3.
    #[error("numerical abort: {0}")]
    Abort(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Abort(_) => 3,
        }
    }

    pub fn in_variant(self, name: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("variant `{name}`: {m}")),
            other => other,
        }
    }
}

impl From<descent::Error> for CliError {
    fn from(e: descent::Error) -> Self {
        match e {
            descent::Error::DegenerateRetraction { .. } => CliError::Abort(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
