use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("rank {rank} out of range [0, {count})")]
    RankOutOfRange { rank: u128, count: u128 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A configurable size limit was hit (dense matrix cap, enumeration cap).
    #[error("{what} = {size} exceeds cap {cap}")]
    ResourceCap { what: String, size: u128, cap: u128 },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("eigenvalue {index} did not converge after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("negative entry {value} at index {index}; input must be nonnegative")]
    NegativeEntry { index: usize, value: f64 },

    #[error("fourth moment of {0} is infinite")]
    InfiniteMoment(String),

    /// A hypothesis of a variance bound (or another theorem-level precondition) fails.
    #[error("{0}")]
    Hypothesis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::ResourceCap { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
