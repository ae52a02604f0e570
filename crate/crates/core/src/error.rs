use thiserror::Error;

use crate::compat::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty configuration table")]
    EmptyConfigurationTable,

    #[error("non-positive resource bound")]
    NonPositiveBound,

    #[error("no zero-resource configuration")]
    NoNullConfiguration,

    #[error("instance too large for exact oracle ({combinations} combinations, cap {cap})")]
    OracleTooLarge { combinations: f64, cap: usize },

    #[error("dimension mismatch: expected {expected} resource dimensions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid task {task_id}: {reason}")]
    InvalidTask { task_id: u64, reason: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid compatibility matrix: {}", join(.0))]
    InvalidMatrix(Vec<Violation>),

    #[error("no children at leaf")]
    NoChildrenAtLeaf,

    #[error("illegal block")]
    IllegalBlock,

    #[error("tree too large to enumerate ({n} tasks, cap {cap})")]
    TreeTooLarge { n: usize, cap: usize },

    #[error("incompatible resource spaces")]
    IncompatibleResourceSpaces,

    #[error("invalid composition rule: {0}")]
    InvalidRule(String),

    #[error("search budget must set max_iterations or deadline")]
    EmptyBudget,

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Errors caused by a size guard rather than by malformed input.
    pub fn is_budget_error(&self) -> bool {
        matches!(
            self,
            Error::OracleTooLarge { .. } | Error::TreeTooLarge { .. } | Error::EmptyBudget
        )
    }
}
