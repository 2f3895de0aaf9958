use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid exponent p = {0}: need p >= 1 or p = infinity")]
    InvalidExponent(f64),

    #[error("kernel evaluated at the origin")]
    KernelAtOrigin,

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree {requested} is below the current degree {current}")]
    DegreeTooSmall { requested: u32, current: u32 },

    #[error("coefficient {0} is outside (0, 1)")]
    CoefficientOutOfRange(f64),

    #[error("matrix of {rows}x{cols} exceeds the budget of {budget} entries")]
    BudgetExceeded { rows: usize, cols: usize, budget: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
