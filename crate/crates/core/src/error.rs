use alloc::string::String;

use crate::graph::PairRef;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("edge ({subject}, {object}) references a node outside 0..{nodes}")]
    NodeOutOfRange {
        subject: usize,
        object: usize,
        nodes: usize,
    },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("edge ({subject}, {object}) uses the reserved background label 0")]
    BackgroundLabel { subject: usize, object: usize },
    #[error("predicate {predicate} outside 1..={max}")]
    PredicateOutOfRange { predicate: u32, max: u32 },
    #[error("object class {class} outside 0..{count}")]
    ClassOutOfRange { class: u32, count: u32 },
    #[error("density is undefined: no ordered node pairs")]
    UndefinedDensity,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("pair ({subject}, {object}) was never observed and smoothing is zero")]
    UnseenPair { subject: u32, object: u32 },
    #[error("degenerate batch: no foreground edges")]
    DegenerateBatch,
    #[error("no loss value for pair {0:?}")]
    MissingLoss(PairRef),
    #[error("loss value for pair {0:?} which is not part of the edge set")]
    ExtraLoss(PairRef),
    #[error("loss value {value} for pair {pair:?} is negative or non-finite")]
    InvalidLoss { pair: PairRef, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("gradient contains non-finite values")]
    NonFiniteGradient,
    #[error("prediction/graph mismatch: {0}")]
    IdMismatch(String),
    #[error("invalid prediction for {graph_id}: {reason}")]
    InvalidPrediction { graph_id: String, reason: String },
    #[error("holdout of {requested} compositions requested but only {available} are eligible")]
    HoldoutInfeasible { requested: usize, available: usize },
    #[error("no zero-shot test triplet after {0} attempts")]
    RetryLimit(usize),
}
