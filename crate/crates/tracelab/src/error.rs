use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("residue {0} has no inverse modulo {1}")]
    NotInvertible(u64, u64),

    #[error("no primes satisfy the rule below {0}")]
    EmptyPrimeSet(u64),

    #[error("invalid weight family: {0}")]
    InvalidFamily(String),

    #[error("weight has {weight} entries but orbit has {orbit}")]
    LengthMismatch { weight: usize, orbit: usize },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("rational precision exhausted after {steps} of {requested} steps")]
    PrecisionExhausted { steps: usize, requested: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
