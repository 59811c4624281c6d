use thiserror::Error;

use crate::comm::ProtocolFault;

/// Terminal outcome of presolve other than a reduced problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PresolveError {
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("problem is unbounded: {0}")]
    Unbounded(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal fault: {0}")]
    Internal(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolFault),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostsolveError {
    #[error("stack corruption: {0}")]
    StackCorruption(String),
    #[error("solution does not match reduced problem: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolFault),
}
