use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky hit a pivot below the semidefinite tolerance.
    #[error("matrix is not positive semidefinite: pivot {pivot:.3e} at row {row}")]
    Factorization { row: usize, pivot: f64 },

    /// A test or metric is missing a required setting (e.g. a NIM).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The requested design cannot guarantee its error rates.
    #[error("infeasible design: {0}")]
    Planning(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn planning(msg: impl Into<String>) -> Self {
        Self::Planning(msg.into())
    }

    pub(crate) fn configuration(msg: impl Into<String>) -> Self {
        Self::Configuration(msg.into())
    }

    pub(crate) fn evaluation(msg: impl Into<String>) -> Self {
        Self::Evaluation(msg.into())
    }
}
