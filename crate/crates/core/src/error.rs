use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: k = {k}, n = {n} ({reason})")]
    Dimension { k: usize, n: usize, reason: &'static str },

    #[error("rows are rank deficient: smallest/largest singular value ratio {ratio:e}")]
    RankDeficient { ratio: f64 },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("no sign change found for k = {k} while bracketing {what}")]
    NoRoot { k: usize, what: &'static str },

    #[error("beta = pi/2: density vanishes identically")]
    DegenerateBeta,

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("Monte-Carlo estimate is zero for n = {n}: the ball was never hit")]
    InsufficientSamples { n: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
