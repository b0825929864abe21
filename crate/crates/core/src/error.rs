use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LcgmError {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid feasibility system: {0}")]
    InvalidSystem(String),

    #[error("invalid transition map: {0}")]
    InvalidTransition(String),

    #[error("not a transition group: {0}")]
    NotAGroup(String),

    #[error("enumeration bound exceeded: d = {d} > {max}")]
    EnumerationBoundExceeded { d: usize, max: usize },

    #[error("column {0} is zero")]
    DegenerateColumn(usize),

    #[error("matrix is not invertible")]
    NotInvertible,

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("preconditions failed: {}", .0.join("; "))]
    PreconditionFailed(Vec<String>),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = LcgmError> = std::result::Result<T, E>;
