use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("hessian asymmetry defect {defect:e} exceeds 1e-10")]
    Asymmetric { defect: f64 },

    #[error("evaluation outside the domain at {0:?}")]
    OutOfDomain(Vec<f64>),

    #[error("non-finite value during evaluation: {0}")]
    NonFinite(String),

    #[error("missing analytic derivatives: {0}")]
    MissingDerivatives(String),

    #[error("unverified input: {0}")]
    Unverified(String),

    /// Equivalent formulations disagreed. This indicates a defect, not a verdict.
    #[error("internal disagreement: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
