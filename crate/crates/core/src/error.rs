use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into validation failures (bad inputs, preconditions) and
/// budget failures (a search or enumeration would exceed its configured cap).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rate {rate} is not representable at n = {n}; nearest representable rates are {lower} and {upper}")]
    NonRepresentableRate {
        rate: f64,
        n: u64,
        lower: f64,
        upper: f64,
    },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("search budget exceeded: {0}")]
    Budget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True when the error comes from a size, search or numerical budget rather
    /// than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::SizeCap(_) | Error::Budget(_) | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
