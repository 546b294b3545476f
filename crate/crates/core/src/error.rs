use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the explanation engine.
///
/// Variants are grouped so that front ends can map them to coarse outcome
/// classes (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("input width mismatch: expected {expected} columns, got {actual}")]
    Width { expected: usize, actual: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("protocol error (request id {id}): {message}{}", fmt_diag(.diagnostics))]
    Protocol {
        id: u64,
        message: String,
        diagnostics: String,
    },

    #[error("model is not differentiable; use the black-box `shap` explainer instead")]
    NotDifferentiable,

    #[error("unknown explainer `{name}`; valid keys: {}", .valid.join(", "))]
    UnknownExplainer { name: String, valid: Vec<String> },

    #[error("explainer `{explainer}` requires capability `{capability}` which the model lacks")]
    MissingCapability {
        explainer: String,
        capability: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_diag(d: &str) -> String {
    if d.trim().is_empty() {
        String::new()
    } else {
        format!("; child stderr: {}", d.trim())
    }
}

/// Coarse error class used for exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Model,
    Other,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Schema(_) | Error::Data(_) | Error::Width { .. } => ErrorCategory::Data,
            Error::Model(_) | Error::Protocol { .. } | Error::NotDifferentiable => {
                ErrorCategory::Model
            }
            Error::UnknownExplainer { .. }
            | Error::MissingCapability { .. }
            | Error::InvalidArgument(_) => ErrorCategory::Usage,
            Error::Json(_) => ErrorCategory::Data,
            Error::Precondition(_) | Error::Io(_) => ErrorCategory::Other,
        }
    }
}
