use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("valuation of zero is undefined")]
    ZeroValuation,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point {0} does not lie in the domain")]
    NotInDomain(String),
    #[error("function has a pole at the type-1 point {0}")]
    Pole(String),
    #[error("argument outside of the domain [{lo}, {hi}]: {at}")]
    OutOfRange { lo: String, hi: String, at: String },
    #[error("domain mismatch between piecewise functions")]
    DomainMismatch,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("matrix entry is not a Laurent polynomial: {0}")]
    NonLaurent(String),
    #[error("no cyclic vector found after {0} attempts")]
    NonCyclic(usize),
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
