use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the sketching library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient (column {column} collapsed)")]
    RankDeficient { column: usize },

    #[error("row count {rows} is not a power of two")]
    NotPowerOfTwo { rows: usize },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("leverage-score sampling needs a leverage profile")]
    MissingAux,

    #[error("output dimension {out_dim} must be smaller than input dimension {in_dim}")]
    DimensionOrder { in_dim: usize, out_dim: usize },

    #[error(
        "refusing to materialize a dense operator with input dimension {in_dim} (limit {limit})"
    )]
    TooLarge { in_dim: usize, limit: usize },

    #[error("{total} is not divisible by {parts}")]
    Indivisible { total: usize, parts: usize },

    #[error("local sketch {node} has {found} columns, expected {expected}")]
    ColumnMismatch {
        node: usize,
        expected: usize,
        found: usize,
    },

    #[error("node {0} is missing from the aggregation set")]
    MissingNode(usize),

    #[error("plan infeasible: {0}")]
    PlanInfeasible(String),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("dimension formula needs parameter `{0}`")]
    MissingParam(&'static str),

    #[error("sketched matrix is rank deficient; increase the sketch size")]
    SketchRankCollapse,

    #[error("iterate norm {norm:e} exceeded the divergence guard at iteration {iteration}")]
    Divergence { iteration: usize, norm: f64 },

    #[error("misestimation factor is zero: some block carries no leverage mass")]
    DegenerateBlock,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
