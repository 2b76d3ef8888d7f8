use crate::pc::NodeId;
use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("edge relation contains a cycle through nodes {0:?}")]
    CycleDetected(Vec<NodeId>),
    #[error("edge label must be -1 or +1, got {0}")]
    BadLabel(i64),
    #[error("node {0:?} is not part of this circuit")]
    UnknownNode(NodeId),
    #[error("evaluation budget of {budget_bits} bits exceeded at node {node:?}")]
    EvalBudgetExceeded { node: NodeId, budget_bits: u64 },
    #[error("not a power circuit: node {0:?} has negative successor value")]
    NotAPowerCircuit(NodeId),
    #[error("exponent marking evaluates to a negative number")]
    NegativeExponent,
    #[error("comparison offset {0} exceeds the initial-chain capacity")]
    OffsetTooLarge(u64),
    #[error("prospective node duplicates an existing node value")]
    DuplicateValue,
    #[error("prospective node has a non-compact successor marking")]
    NonCompactSuccessor,
    #[error("reduction precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("chain extension amount {0} exceeds the initial-chain capacity")]
    MuTooLarge(u64),
    #[error("marking does not fit its chain during re-compaction")]
    ChainOverflow,
    #[error("quotient is not a power of two (mantissas differ or are zero)")]
    NotPowerOfTwoRatio,
    #[error("dyadic value is not an integer")]
    NotInteger,
    #[error("invalid letter {0:?} in word (expected a, A, b, B, t, T or 1)")]
    BadLetter(char),
    #[error("argument {0} exceeds the supported range")]
    TooLarge(u64),
    #[error("rewriting budget of {0} bits exceeded")]
    BudgetExceeded(u64),
    #[error("enumeration bound {0} exceeds the guard (max 24)")]
    EnumerationTooLarge(u64),
    #[error("circuit depth {depth} exceeds the stated bound {bound}")]
    DepthBoundViolated { depth: usize, bound: usize },
    #[error("boolean circuit is not layered: {0}")]
    NotLayered(String),
    #[error("input word is not certified Britton-reduced")]
    NotBrittonReduced,
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
