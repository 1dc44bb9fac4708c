use std::fmt;
use std::process::ExitCode;

/// A failed invocation: exit status 1 for usage and input problems, 2 for
/// numerical or statistical failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<nlsparse::Error> for Failure {
    fn from(e: nlsparse::Error) -> Self {
        use nlsparse::Error::*;
        match e {
            Input(_) | Config(_) => Failure::usage(e.to_string()),
            Numerical(_)
            | LineSearchExhausted { .. }
            | DantzigInfeasible { .. }
            | DegenerateVariance
            | SingularDenominator(_)
            | TooLarge { .. } => Failure::numerical(e.to_string()),
        }
    }
}
