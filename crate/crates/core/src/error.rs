use thiserror::Error;

/// Errors produced by the numerical and configuration layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// An iterative method ran out of budget before meeting its tolerance.
    #[error("no convergence after {evaluations} evaluations: best estimate {best} (error estimate {error_estimate:e})")]
    Convergence {
        best: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    /// A requested outage target cannot be met inside the backoff bracket.
    #[error("target outage {target} is not reachable for backoff in [{lo:e}, {hi:e}]")]
    InfeasibleTarget { target: f64, lo: f64, hi: f64 },

    /// Invalid scenario or simulation configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Reading or writing an artifact failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// A failure while evaluating one point of a sweep.
    #[error("{scheme} at {axis}={value}: {source}")]
    AtGridPoint {
        scheme: String,
        axis: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
