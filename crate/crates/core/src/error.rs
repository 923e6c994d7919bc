use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel evaluated at separation {separation:e} λ, below the singularity cutoff")]
    Singularity { separation: f64 },

    #[error("{what} did not converge (residual {residual:e}, tolerance {tolerance:e})")]
    Convergence {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("no thermalization: friction {friction:e} is not positive")]
    NoThermalization { friction: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
