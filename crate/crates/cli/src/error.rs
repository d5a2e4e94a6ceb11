use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad parameters; exit code 2.
    Usage(String),
    /// A budget ran out before any result existed; exit code 3.
    Budget(String),
    /// I/O and other runtime failures; exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Run(_) => 1,
        }
    }

    /// Prefixes a validation message with the parameter path.
    pub fn at(section: &str, key: &str, msg: impl fmt::Display) -> CliError {
        CliError::Usage(format!("{section}.{key}: {msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "invalid parameters: {m}"),
            CliError::Budget(m) => write!(f, "budget exhausted: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<ghzbayes::Error> for CliError {
    fn from(e: ghzbayes::Error) -> CliError {
        match e {
            ghzbayes::Error::Invalid(m) | ghzbayes::Error::Parse(m) => CliError::Usage(m),
            ghzbayes::Error::Budget(m) => CliError::Budget(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Run(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::Run(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Run(format!("json error: {e}"))
    }
}
