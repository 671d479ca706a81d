use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("window [{start}, {end}) out of range for series of length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },

    #[error("series length {len} exceeds the enumeration limit {max}")]
    TooLarge { len: usize, max: usize },

    #[error(
        "big-M too small: coefficient jump {jump:.6} at break {break_index} reaches {ratio:.1}% of M = {big_m:.6}"
    )]
    BigMTooSmall {
        break_index: usize,
        jump: f64,
        big_m: f64,
        ratio: f64,
    },

    #[error("regime {regime} has {len} observations, at least {needed} required")]
    RegimeTooShort {
        regime: usize,
        len: usize,
        needed: usize,
    },

    #[error("singular matrix: {0}")]
    Singular(String),
}
