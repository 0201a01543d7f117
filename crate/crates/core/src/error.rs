use thiserror::Error;

/// Errors raised by the trend-test library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("analytic variance requires the symmetric LRD direction; use the permutation test")]
    UnsupportedDirection,

    #[error("inconsistent u/v counts: sum(u) = {sum_u}, sum(v) = {sum_v}")]
    InconsistentCounts { sum_u: u64, sum_v: u64 },

    #[error("invalid tie structure: {0}")]
    InvalidTieStructure(String),

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("degenerate regime: {0}")]
    DegenerateRegime(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no data left after excluding groups with missing values")]
    NoData,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by malformed input files or configuration,
    /// as opposed to statistical preconditions.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
