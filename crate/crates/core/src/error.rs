use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its constraint.
    #[error("invalid `{key}`: {reason}")]
    Config { key: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// Requested open rate exceeds the mean uplink rate.
    #[error("infeasible open rate {alpha} (mean uplink rate is {max})")]
    Infeasible { alpha: f64, max: f64 },

    /// An outage tolerance of zero has no finite margin under an unbounded posterior.
    #[error("no finite margin for outage tolerance 0")]
    NoFiniteMargin,

    /// A Gaussian posterior with zero spread; the caller should use the point mass.
    #[error("degenerate posterior (sigma = 0)")]
    DegeneratePosterior,
}

impl Error {
    pub(crate) fn config(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            key,
            reason: reason.into(),
        }
    }
}
