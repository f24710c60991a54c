use std::collections::BTreeMap;

use thiserror::Error;

/// Errors raised by the factorization pipeline and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: ‖m − m*‖ = {deviation:.3e} exceeds {tolerance:.3e}")]
    Symmetry { deviation: f64, tolerance: f64 },

    #[error("index {index} is outside the alias-free range |k| < {limit} for grid size {grid_size}")]
    Range {
        index: i64,
        limit: i64,
        grid_size: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("density is indefinite at node {node}: smallest eigenvalue {min_eigenvalue:.3e} below −{tolerance:.3e}")]
    Definiteness {
        node: usize,
        min_eigenvalue: f64,
        tolerance: f64,
    },

    #[error("rank is not a.e. constant: histogram {histogram:?}")]
    RankInstability { histogram: BTreeMap<usize, usize> },

    #[error("eigenvalue {index} is not positive at node {node} (value {value:.3e})")]
    Positivity { index: usize, node: usize, value: f64 },

    #[error("exponent overflow at node {node}: |Re Q| = {magnitude:.3e} > 700")]
    Magnitude { node: usize, magnitude: f64 },

    #[error("gauge normalization impossible: leading block of b(0) has rank {rank} < {expected}")]
    Gauge { rank: usize, expected: usize },

    #[error("eigenvector field failed the causality check (negative energy ratio {ratio:.3e}); pass force to proceed")]
    NonCausal { ratio: f64 },

    #[error("insufficient history: path length {length} must exceed filter order {order}")]
    InsufficientHistory { length: usize, order: usize },

    #[error("{0} did not converge")]
    Convergence(&'static str),

    #[error("parse error at {field}: {message}")]
    Parse { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
