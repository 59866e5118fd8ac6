use thiserror::Error;

/// Errors raised by the library. The CLI maps `Domain` and `Usage` to exit
/// code 2 and everything else to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate:e}, achieved error {error:e}")]
    Quadrature { a: f64, b: f64, estimate: f64, error: f64 },
    #[error("execution failure: {0}")]
    Execution(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Usage(_) | Error::Parse(_))
    }
}
