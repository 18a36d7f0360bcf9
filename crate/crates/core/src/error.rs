use std::path::PathBuf;

/// Errors produced by the laboratory.
///
/// Numerical non-convergence of a solver is usually *not* an error: solvers
/// return a report with a termination reason, and the threshold machinery
/// turns that into a verdict. The variants here cover contract violations,
/// overflow of the exponential nonlinearity and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exponential overflow: max u = {max_u} exceeds the cap {cap}")]
    Overflow { max_u: f64, cap: f64 },

    #[error("{what} did not converge after {iterations} iterations (best estimate {estimate})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        estimate: f64,
    },

    #[error("threshold search: {0}")]
    Threshold(String),

    #[error("order interval violated: {0}")]
    OrderInterval(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
