use std::fmt;

/// Exit code 2: the input could not be parsed or violates an invariant.
pub const EXIT_INPUT: u8 = 2;
/// Exit code 1: the analysis ran but a check failed.
pub const EXIT_CHECK: u8 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid input.
    Input(String),
    /// The analysis itself failed on valid input.
    Analysis(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Analysis(_) => EXIT_CHECK,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "invalid input: {msg}"),
            CliError::Analysis(msg) => write!(f, "analysis failed: {msg}"),
        }
    }
}

impl From<attractor::Error> for CliError {
    fn from(e: attractor::Error) -> Self {
        CliError::Analysis(e.to_string())
    }
}
