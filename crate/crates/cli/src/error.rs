use std::fmt;
use std::process::ExitCode;

use kroninfer::KronError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<KronError> for CliError {
    fn from(e: KronError) -> Self {
        let msg = e.to_string();
        match e {
            KronError::ParameterOutOfRange(_)
            | KronError::SizeOverflow { .. }
            | KronError::DimensionMismatch { .. }
            | KronError::IndexOutOfRange(_)
            | KronError::InvalidConfig(_) => CliError::Validation(msg),
            KronError::MalformedLine { .. }
            | KronError::CrossGraphEdge { .. }
            | KronError::MissingFile(_)
            | KronError::InvalidFormat(_)
            | KronError::Io(_) => CliError::Io(msg),
            KronError::DegenerateGraph { .. } | KronError::ConvergenceFailure { .. } => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
