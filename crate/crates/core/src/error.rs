use thiserror::Error;

/// Errors raised by the solver. Every variant names the operation that failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: argument {value} is outside the domain ({detail})")]
    Domain {
        op: &'static str,
        value: f64,
        detail: &'static str,
    },

    #[error("{op}: singular step, f'({at}) = 0")]
    SingularStep { op: &'static str, at: f64 },

    #[error("{op}: plan is not strictly increasing at index {index}")]
    NonMonotonePlan { op: &'static str, index: usize },

    #[error("{op}: no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{op}: iteration diverged ({detail})")]
    Divergence { op: &'static str, detail: String },

    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },

    #[error("{op}: {detail}")]
    Io { op: &'static str, detail: String },
}

impl Error {
    /// Name of the operation that raised the error.
    pub fn op(&self) -> &'static str {
        match self {
            Error::Domain { op, .. }
            | Error::SingularStep { op, .. }
            | Error::NonMonotonePlan { op, .. }
            | Error::NoConvergence { op, .. }
            | Error::Divergence { op, .. }
            | Error::Invalid { op, .. }
            | Error::Io { op, .. } => op,
        }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
