use thiserror::Error;

/// Errors raised by the numerical routines and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few observations (or grid points) to carry out the computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The data make the statistic undefined, e.g. a zero variance.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed user input such as an unparsable specification or CSV line.
    #[error("invalid input: {0}")]
    Input(String),

    /// A root finder or quadrature failed to produce a usable value.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The profile-likelihood optimizer ran out of iterations.
    #[error(
        "optimizer did not converge after {iterations} iterations \
         (best nu = {best_nu}, log-likelihood = {best_log_lik})"
    )]
    NotConverged {
        iterations: usize,
        best_nu: f64,
        best_log_lik: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
