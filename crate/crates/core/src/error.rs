use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("entries ({row}, {col}) and ({col}, {row}) disagree: {lower} vs {upper}")]
    AsymmetricInput {
        row: usize,
        col: usize,
        lower: f64,
        upper: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("cycle detected in parent array at node {0}")]
    CycleDetected(usize),

    #[error("non-positive pivot d[{index}] = {value:e}")]
    NonPositivePivot { index: usize, value: f64 },

    #[error("symbolic pattern does not match the matrix: {0}")]
    PatternMismatch(String),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("dimension {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("entry ({row}, {col}) is not covered by the selected pattern")]
    PatternNotCovered { row: usize, col: usize },

    #[error("fixed-effect design is rank deficient (rank {rank} < {p})")]
    RankDeficientX { rank: usize, p: usize },

    #[error("empty factor or block: {0}")]
    EmptyFactor(String),

    #[error("{n} observations exceed the dense H-form limit {limit}")]
    TooLargeForDenseForm { n: usize, limit: usize },

    #[error("invalid variance parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),
}
