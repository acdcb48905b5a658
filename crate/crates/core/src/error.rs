use thiserror::Error;

/// Errors raised by the library. Each variant names the offending quantity so
/// the command-line front end can point at the right flag.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("`{name}` must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },

    #[error("`{name}` = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("origin {origin} is not admissible for the {family} family")]
    Inadmissible { origin: f64, family: &'static str },

    #[error("damping must be positive for the finite-damping estimate; use the inviscid closed form for lambda = 0")]
    InviscidNotSupported,

    #[error("no shock-time estimate: {0}")]
    NoEstimate(String),

    #[error("domain half-width {half_width} is below the causal reach {required} for t_end = {t_end}")]
    DomainTooSmall {
        half_width: f64,
        required: f64,
        t_end: f64,
    },

    #[error("characteristic from {origin} left the recorded window at t = {t_exit}")]
    LeftWindow { origin: f64, t_exit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}
