use std::fmt;

use covert_skg::Error;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Parse(String),
    Precondition(String),
    Guard(String),
    Verdict(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 3,
            Failure::Precondition(_) => 4,
            Failure::Guard(_) => 5,
            Failure::Verdict(_) => 6,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Parse(m) | Failure::Precondition(m) | Failure::Guard(m) | Failure::Verdict(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Parse(_) => Failure::Parse(msg),
            Error::Io(_) => Failure::Io(msg),
            Error::SizeGuard { .. } => Failure::Guard(msg),
            Error::SearchFailure { .. } => Failure::Verdict(msg),
            _ => Failure::Precondition(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}
