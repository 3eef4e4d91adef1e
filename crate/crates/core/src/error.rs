use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {row} of matrix {matrix} sums to {sum}, expected 1")]
    RowSum { matrix: usize, row: usize, sum: f64 },

    #[error("entry ({row}, {col}) of matrix {matrix} is {value}, outside [0, 1]")]
    NegativeEntry {
        matrix: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("power iteration did not converge within {iterations} iterations")]
    NotErgodic { iterations: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("revisit window {window} exceeds schedule length {m}")]
    WindowTooLong { window: usize, m: usize },

    #[error("enumeration needs {paths} paths, cap is {cap}")]
    TooLarge { paths: u128, cap: u128 },

    #[error("m = {m} is below 2T = {min}")]
    MTooSmall { m: f64, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear system (I - alpha M) is singular")]
    SingularSystem,

    #[error("trajectory carries no exploration flags")]
    MissingFlags,

    #[error("exploration probability {0} outside (0, 1)")]
    InvalidUpsilon(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidParameter(alloc::format!($($arg)*))
    };
}

macro_rules! mismatch {
    ($($arg:tt)*) => {
        $crate::error::Error::DimensionMismatch(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use mismatch;
