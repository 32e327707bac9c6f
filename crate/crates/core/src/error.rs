use thiserror::Error;

/// Errors raised anywhere along the simulated link.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is out of its valid domain.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// The receiver could not produce decisions (e.g. signal too short).
    #[error("decode error: {0}")]
    Decode(String),

    #[error("offset calibration failed: {0}")]
    Calibration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A chain error annotated with the Monte Carlo trial that produced it.
    #[error("trial {trial} at {snr_db} dB: {source}")]
    Trial {
        snr_db: f64,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
