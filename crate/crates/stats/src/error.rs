use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input {0:?} is constant; statistic undefined")]
    ConstantInput(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("design is rank deficient; dependent column(s): {0}")]
    RankDeficient(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("design/grid mismatch: {0}")]
    DesignMismatch(String),
    #[error("{0}")]
    Invalid(String),
}
