use std::fmt;

/// Failure of one command, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Core(crashtweet_core::Error),
    Internal(String),
}

impl CliError {
    /// 1 internal, 2 configuration, 3 input validation, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        use crashtweet_core::Error as E;
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Core(e) => match e {
                E::Config(_) => 2,
                E::Divergence { .. } => 4,
                E::Record { .. } | E::Invalid(_) | E::Shape(_) | E::Io { .. } | E::Json(_) => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crashtweet_core::Error> for CliError {
    fn from(e: crashtweet_core::Error) -> Self {
        CliError::Core(e)
    }
}
