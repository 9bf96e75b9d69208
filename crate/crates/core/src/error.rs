use thiserror::Error;

/// Errors raised by the analysis, mixture and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function}: domain error: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("interference alignment infeasible: {0}")]
    Infeasible(String),

    #[error("duplicate scales in source spec (indices {0} and {1}); merge before computing weights")]
    DuplicateScales(usize, usize),

    #[error("source spec needs at least two sources to form a mixture weight, got {0}")]
    TooFewSources(usize),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("quadrature did not reach tolerance: estimate {value}, error estimate {error}")]
    Quadrature { value: f64, error: f64 },

    #[error("operation needs uniform feedback bits across links: {0}")]
    NonUniformBits(String),

    #[error("target unattainable: {0}")]
    Unattainable(String),

    #[error("codebook budget exceeded: {bits} bits > cap of {cap}")]
    BudgetExceeded { bits: u32, cap: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
