use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column {column}: cannot parse {cell:?} as a number")]
    NotANumber {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("row {row}, column {column}: non-finite value {cell:?}")]
    NonFinite {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid chain shape: {0}")]
    Shape(String),

    #[error("chain {chain} has shape {found_n}x{found_p}, expected {expected_n}x{expected_p}")]
    ShapeMismatch {
        chain: usize,
        expected_n: usize,
        expected_p: usize,
        found_n: usize,
        found_p: usize,
    },

    #[error("burn-in {burnin} leaves no samples from {n} iterations")]
    BurnIn { burnin: usize, n: usize },

    #[error("{what} requires ≥{needed} chains, got {found}")]
    TooFewChains {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error(
        "batch size {batch_size} gives {batches} batches over {n} iterations; need at least 2"
    )]
    TooFewBatches {
        batch_size: usize,
        batches: usize,
        n: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("within-chain variance is zero; the chains are degenerate")]
    DegenerateVariance,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("variance estimate has no positive spectrum and cannot be repaired")]
    Unrepairable,

    #[error("iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for failures that only mean "the chains do not carry enough
    /// information yet"; sequential monitors keep sampling on these.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance | Error::NotPositiveDefinite | Error::Unrepairable
        )
    }
}
