use mismatch_core::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad files, arguments or shapes: exit 1.
    Input(String),
    /// The library declined to certify, or a report failed re-validation: exit 2.
    Refused(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Refused(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Refused(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::CertificationRefused(_) | Error::NotMember(_) => CliError::Refused(e.to_string()),
            Error::BudgetExceeded { .. } => {
                CliError::Input(format!("{e}; use --mode mc for a Monte Carlo estimate instead"))
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}
