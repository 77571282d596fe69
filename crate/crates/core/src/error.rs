use thiserror::Error;

/// Errors raised by the analysis, oracle and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported moment order {0} (only 1 and 2)")]
    UnsupportedOrder(u32),

    #[error("model is unstable (stability margin {margin:.6e})")]
    Unstable { margin: f64 },

    #[error("truncation insufficient: boundary mass {boundary_mass:.3e} at max_orbit {max_orbit}, try max_orbit >= {suggested}")]
    TruncationInsufficient {
        boundary_mass: f64,
        max_orbit: usize,
        suggested: usize,
    },

    #[error("not a PGF at this tolerance: coefficient {index} = {value:.3e}")]
    NotAPgf { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("formula integrity check failed: {0}")]
    Integrity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
