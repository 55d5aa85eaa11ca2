use thiserror::Error;

/// Largest `n` for which the library enumerates all of `S_n`.
pub const ENUMERATION_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for {name}: {reason}")]
    ParameterDomain { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coefficient singularity: |{channel}| = 1 makes {channel}/(1-{channel}^2) infinite; use exact-match comparison instead")]
    CoefficientSingularity { channel: &'static str },

    #[error("enumeration cap n ≤ {cap} exceeded (n = {n})")]
    EnumerationCap { n: usize, cap: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("no permutation reproduces the noise-free {0} channel exactly")]
    NoExactMatch(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::ParameterDomain {
            name,
            reason: reason.into(),
        }
    }
}

/// Fails with [`Error::EnumerationCap`] when `n` exceeds `cap`.
pub fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::EnumerationCap { n, cap })
    } else {
        Ok(())
    }
}
