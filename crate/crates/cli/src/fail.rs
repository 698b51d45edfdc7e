use std::fmt;
use std::path::Path;

use sabasis_core::Error;

/// Process exit codes.
pub mod code {
    pub const PASS: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const DOMAIN: u8 = 2;
    pub const IO: u8 = 3;
    pub const PARSE: u8 = 4;
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => code::IO,
            CliError::Parse(_) => code::PARSE,
            // Malformed step functions inside an input are parse failures.
            CliError::Core(Error::Structural(_)) => code::PARSE,
            CliError::Core(_) => code::DOMAIN,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            code::IO => "io",
            code::PARSE => "parse",
            _ => "domain",
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
