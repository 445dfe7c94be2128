use thiserror::Error;

use crate::treeplex::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeplexError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a decision node")]
    NotDecision(NodeId),
    #[error("node {0} is not an observation node")]
    NotObservation(NodeId),
    #[error("node {node} has no action {action}")]
    UnknownAction { node: NodeId, action: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed treeplex: {0}")]
    Structure(String),
    #[error("vector violates sequence-form constraints by {0:e}")]
    NotAStrategy(f64),
    #[error("decision node {0} does not hold a simplex point")]
    NotASimplexPoint(NodeId),
}

/// Failures while reading or converting an extensive-form game.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error("perfect recall violated at information set {infoset:?} (line {line})")]
    PerfectRecall { infoset: String, line: usize },
    #[error("game too large: {count} {what} exceeds the limit of {limit}")]
    TooLarge {
        what: &'static str,
        count: u128,
        limit: u128,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Treeplex(#[from] TreeplexError),
}

impl GameError {
    /// Line the diagnostic refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            GameError::Syntax { line, .. }
            | GameError::Semantic { line, .. }
            | GameError::PerfectRecall { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegretError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry in input vector")]
    NonFinite,
    #[error("stepsize must be positive and finite, got {0}")]
    BadStepsize(f64),
    #[error("next_decision called twice without an observed loss")]
    DecisionPending,
    #[error("observe_loss called without a pending decision")]
    NoPendingDecision,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Treeplex(#[from] TreeplexError),
    #[error(transparent)]
    Regret(#[from] RegretError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("not enough data: {0}")]
    InsufficientData(String),
}
