use thiserror::Error;

/// Errors raised by the numerical routines and the CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A grid does not cover enough of the mass of the density it tabulates.
    #[error("range error: {0}")]
    Range(String),

    /// A grid or sample request exceeds the configured memory guard.
    #[error("resource error: {0}")]
    Resource(String),

    /// The rejection sampler accepted too few proposals.
    #[error("acceptance rate {rate:.3e} is below 1e-6; enlarge the conditioning window epsilon")]
    AcceptanceTooLow { rate: f64 },

    /// A model specification is malformed or violates the density-class requirements.
    #[error("invalid model: {0}")]
    Model(String),

    /// A configuration key or value could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
