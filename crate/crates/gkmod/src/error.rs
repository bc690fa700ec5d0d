use alloc::string::String;
use core::fmt;

/// Errors surfaced by the library. Messages carry the offending value.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    Domain(String),
    /// A continued-fraction orbit reached x = 0.
    Terminated,
    /// An iterative method stopped before reaching its tolerance.
    NoConvergence { what: String, residual: f64 },
    /// Internal consistency check failed (exactness, route agreement, ...).
    Check(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Terminated => write!(f, "orbit terminated at x = 0"),
            Error::NoConvergence { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:e})")
            }
            Error::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
