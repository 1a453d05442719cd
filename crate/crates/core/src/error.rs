use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("invalid record {id}: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("empty vector file")]
    EmptyVectorFile,

    #[error("no embedding for record {0}")]
    MissingEmbedding(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty pool")]
    EmptyPool,

    #[error("stack requires ≥2 parts")]
    StackArity,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("invalid training input: {0}")]
    TrainInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class {class} has {size} members, fewer than k = {k}")]
    ClassTooSmall {
        class: String,
        size: usize,
        k: usize,
    },

    #[error("5x2cv variance estimate is zero")]
    DegenerateVariance,

    #[error("ragged ratings: item {item} has {actual} ratings, expected {expected}")]
    RaggedRatings {
        item: usize,
        expected: usize,
        actual: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("category {category} has {available} records, need {requested}")]
    InsufficientRecords {
        category: String,
        available: usize,
        requested: usize,
    },

    #[error("missing resources: {}", .0.join(", "))]
    MissingResources(Vec<String>),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("malformed rule file: {0}")]
    RuleFormat(String),
}
