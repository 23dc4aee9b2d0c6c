use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpbError {
    #[error("invalid rate schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid change-point law: {0}")]
    InvalidLaw(String),

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("histories are not comparable: {0}")]
    Incomparable(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("enumeration capacity exceeded: n = {n}, maximum is {max}")]
    Capacity { n: usize, max: usize },

    #[error("discretization step m = {m} too coarse: rate {rate} / m is not below 1")]
    RateOverflow { m: u32, rate: f64 },

    #[error("value {value} outside admissible range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("search failed: {0}")]
    SearchFailure(String),
}

pub type Result<T> = std::result::Result<T, CpbError>;
