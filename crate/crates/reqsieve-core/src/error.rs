use thiserror::Error;

/// Errors raised by the algorithmic modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("corpus contains no requests")]
    EmptyCorpus,
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels contain a single class only")]
    SingleClass,
    #[error("unlabeled request at row {0} is not allowed in ranking input")]
    UnlabeledInput(usize),
    #[error("selection size {n} outside 1..={max}")]
    OutOfRange { n: usize, max: usize },
    #[error("vector dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("degenerate training input: {0}")]
    DegenerateInput(&'static str),
    #[error("solver did not reach tolerance within {0} iterations")]
    NonConvergence(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("no labeled data to evaluate")]
    NoLabeledData,
    #[error("empty evaluation set: {0}")]
    EmptySet(&'static str),
    #[error("no operating point satisfies the constraint")]
    Infeasible,
}

pub type Result<T> = core::result::Result<T, Error>;
