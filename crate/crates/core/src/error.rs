use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("accountant grid mismatch: expected {expected} orders, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("accountant ledger is empty")]
    EmptyLedger,

    #[error("iterate diverged at round {round} (norm {norm:e})")]
    Divergence { round: usize, norm: f64 },

    #[error("problem family `{0}` has no closed-form inner maximizer")]
    NoClosedForm(&'static str),

    #[error("dataset contains a single class; both labels are required")]
    SingleClass,

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("Markov chain is not irreducible: stationary distribution did not converge")]
    Reducible,

    #[error("dataset too large for exhaustive enumeration: {size} > {limit}")]
    Oversize { size: usize, limit: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("failed to read dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
