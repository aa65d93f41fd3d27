use thiserror::Error;

use crate::graph::NodeId;
use crate::value::Domain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input name must not be empty")]
    EmptyInputName,
    #[error("input `{0}` is already defined in this graph")]
    DuplicateInputName(String),
    #[error("node {0} does not belong to this graph")]
    ForeignNodeId(NodeId),
    #[error("node {0} is not an input")]
    NotAnInput(NodeId),
    #[error("value domain mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("non-finite float {0} has no exact rational value")]
    NonFiniteRational(f64),
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("logarithm of non-positive value {0}")]
    LogDomainError(String),
    #[error("`{op}` of {arg} has no exact rational value")]
    ExactModeUnsupported { op: &'static str, arg: String },
    #[error("missing binding for input `{0}`")]
    MissingInput(String),
    #[error("no output labelled `{0}`")]
    UnknownOutput(String),
    #[error("finite differences require the float domain")]
    FloatDomainRequired,
    #[error("a Taylor expansion needs at least one term")]
    NoTerms,

    #[error("line {line}: syntax error: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("line {line}: rule `{rule}` is not in Chomsky normal form")]
    NotCnf { line: usize, rule: String },
    #[error("line {line}: probability {prob} is outside (0, 1]")]
    InvalidProbability { line: usize, prob: f64 },
    #[error("nonterminal `{0}` has no rules")]
    UndefinedNonterminal(String),
    #[error("rules for `{lhs}` sum to {sum}, expected 1")]
    NotNormalized { lhs: String, sum: f64 },
    #[error("the grammar has no rules")]
    EmptyGrammar,
    #[error("sentence is empty")]
    EmptySentence,
    #[error("no terminal rule produces `{0}`")]
    UnknownToken(String),
    #[error("sentence {0} has zero inside probability")]
    UnparseableSentence(usize),
    #[error("expected {expected} counts, got {found}")]
    CountLengthMismatch { expected: usize, found: usize },
    #[error("expected counts for `{0}` sum to zero")]
    ZeroLhsMass(String),
    #[error("sentence of length {len} is too long to enumerate (limit {limit})")]
    SentenceTooLong { len: usize, limit: usize },
}
