use thiserror::Error;

/// Errors raised across the crate, grouped by the kind of violation.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an operation precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A requested enumeration exceeds its size guard.
    #[error("size error: {0}")]
    Size(String),

    /// Input data fails a structural validity check.
    #[error("validation error: {0}")]
    Validation(String),

    /// A process model is malformed or non-ergodic where ergodicity is required.
    #[error("model error: {0}")]
    Model(String),

    /// The model's entropy rate is too low for the requested construction.
    #[error("entropy error: {0}")]
    Entropy(String),

    /// A conditioning event has zero probability.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// A conditioning atom received too few accepted samples.
    #[error("undersampled atom: {hits} accepted samples, need at least {min}")]
    Undersampled { hits: usize, min: usize },

    /// A tree certificate fails its structural invariants.
    #[error("certificate violation: {0}")]
    Certificate(String),

    /// Tree admission failed on every attempted conditioning atom.
    #[error("no admissible tree certificate after {attempts} attempts")]
    NoCertificate {
        attempts: usize,
        diagnostics: Box<crate::construct::ConstructDiagnostics>,
    },

    /// The non-recurrence verifier found an offending shift.
    #[error("verification failure: {0}")]
    Verification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
