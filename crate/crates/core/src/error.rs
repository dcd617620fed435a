use thiserror::Error;

/// Errors shared by every module of the crate.
///
/// Domain and validation failures are distinct from resource-cap failures so
/// callers (in particular the CLI) can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero in Q(beta)")]
    DivisionByZero,

    #[error("{value} is outside {domain}")]
    OutOfDomain { value: String, domain: &'static str },

    #[error("word length {n} exceeds the enumeration cap {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("inadmissible digit string: {0}")]
    InadmissibleWord(String),

    #[error("rank {rank} is out of range for words of length {n} ({size} words)")]
    RankOutOfRange { n: usize, rank: u128, size: u128 },

    #[error("float digit extraction exhausted its precision at depth {depth}")]
    PrecisionExhausted { depth: usize },

    #[error("scalar grew to {bits} bits, over the {guard}-bit guard")]
    BitSizeGuard { bits: u64, guard: u64 },

    #[error("not a probability density: {reason}")]
    NotADensity { reason: String },

    #[error("piece degree {degree} exceeds the maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("invalid piecewise function: {0}")]
    InvalidPiecewise(String),

    #[error("invariance constants are missing word {0}")]
    MissingConstant(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by a configured resource cap rather than by
    /// bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::EnumerationCap { .. }
                | Error::PrecisionExhausted { .. }
                | Error::BitSizeGuard { .. }
                | Error::DegreeTooHigh { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
