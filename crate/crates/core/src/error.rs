use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("masked bins inside the requested range: {0}")]
    MaskedInterior(String),
    #[error("negative density: {0}")]
    NegativeDensity(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
