use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// No finite stationary distribution exists: theta = 0 and lambda >= N mu.
    #[error("unstable-without-abandonment: lambda = {lambda} >= N mu = {capacity}")]
    UnstableWithoutAbandonment { lambda: f64, capacity: f64 },

    #[error("numerical-inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("no-root-in-bracket: f({lo}) and f({hi}) share a sign")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("degenerate-load: cumulative load {sigma} for class boundary {boundary} is not below 1")]
    DegenerateLoad { boundary: usize, sigma: f64 },

    #[error("infeasible-at-maxK: caps unmet with threshold {max_k} at boundary {boundary}")]
    InfeasibleAtMaxK { boundary: usize, max_k: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace violation at line {line}: {reason}")]
    TraceViolation { line: usize, reason: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
