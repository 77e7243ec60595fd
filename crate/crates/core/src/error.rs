use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),
    #[error("zero vector for word: {0}")]
    ZeroVector(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate word: {0}")]
    DuplicateWord(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need at least {needed} runs, got {got}")]
    InsufficientRuns { needed: usize, got: usize },
    #[error("space is not normalized")]
    NotNormalized,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("gold targets missing from report: {}", .0.join(", "))]
    MissingTargets(Vec<String>),
}

pub type Result<T> = core::result::Result<T, Error>;
