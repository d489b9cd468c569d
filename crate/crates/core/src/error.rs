use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain (x ≤ 0 for Y, radius ≤ 0, η = 0, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Argument inside the domain but outside the supported/representable range.
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("coincident points: kernel is singular at x = y")]
    Singular,
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("unsupported regularity: {0}")]
    UnsupportedRegularity(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
