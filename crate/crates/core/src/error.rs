use thiserror::Error;

/// Failures raised by the solver and by edits applied to it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation diverged at iteration {iteration}, cell {cell:?}: {reason}")]
    Divergence {
        iteration: u64,
        cell: [usize; 3],
        reason: String,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid edit: {0}")]
    Edit(String),
}

impl SimError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
