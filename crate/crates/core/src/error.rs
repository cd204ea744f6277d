use thiserror::Error;

/// Errors raised by the estimators, kernels and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cardinality truncated at n_max = {n_max} leaves tail mass {tail:e} (must be < 1e-12)")]
    Truncation { n_max: usize, tail: f64 },

    #[error("{what}: size {size} exceeds enumeration limit {limit}")]
    EnumerationLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("configuration has an odd point multiplicity and is not a duplicated configuration")]
    NotDuplicated,

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error bound {error:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },

    #[error("{undefined} of {samples} score evaluations were off-support (limit 0.1%)")]
    SupportMismatch { undefined: u64, samples: u64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 validation, 2 numeric or enumeration limit.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Unsupported(_)
            | Error::NotDuplicated
            | Error::Io(_)
            | Error::Json(_) => 1,
            Error::Truncation { .. }
            | Error::EnumerationLimit { .. }
            | Error::Quadrature { .. }
            | Error::SupportMismatch { .. }
            | Error::Numeric(_) => 2,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
