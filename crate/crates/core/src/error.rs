use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max deviation {deviation:.3e} exceeds {tolerance:.1e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("memory budget exceeded: dimension {requested} > cap {cap}")]
    BudgetExceeded { requested: u128, cap: u64 },

    #[error("type enumeration budget exceeded: {count:.3e} compositions > cap {cap:.3e}")]
    TypeCountExceeded { count: f64, cap: f64 },

    #[error("alphabet too large for exact enumeration: {size} > {max}")]
    AlphabetTooLarge { size: usize, max: usize },

    #[error("support violation: supp(psi) is not contained in supp(phi) (leak {leak:.3e})")]
    SupportViolation { leak: f64 },

    #[error("relative typicality undefined: symbol {symbol} has Q = 0 but P = {p:.3e} > 0")]
    RelativeTypicalityUndefined { symbol: usize, p: f64 },

    #[error("no block length l <= {l_max} achieves the requested approximation")]
    BlockLengthNotFound { l_max: usize },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input file: {0}")]
    MalformedFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
