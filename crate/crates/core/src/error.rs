use thiserror::Error;

/// Errors produced by the information measures and the matching algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("all densities underflow to zero on the grid")]
    DegenerateDistribution,

    #[error("alphabets differ: {left} vs {right} symbols")]
    SupportMismatch { left: usize, right: usize },

    #[error("divergence undefined: q[{index}] = 0 where p[{index}] > 0")]
    DivergenceUndefined { index: usize },

    #[error("empty fuzzy set: logical probability is zero")]
    EmptyFuzzySet,

    #[error("hypothesis has an all-zero transition row")]
    EmptyHypothesis,

    #[error("ratio undefined: prior is zero at symbol {index} where sampling is positive")]
    UndefinedRatio { index: usize },

    #[error("confidence undefined: sensitivity and specificity must be positive")]
    UndefinedConfidence,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("efficiency undefined for R = 0")]
    UndefinedEfficiency,

    #[error("partition is degenerate: label {0} owns no cell")]
    DegeneratePartition(usize),

    #[error("responsibility undefined: Q(x_{index}) = 0 where the target is positive")]
    UndefinedResponsibility { index: usize },

    #[error("component {0} receives no weight")]
    ComponentStarved(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
