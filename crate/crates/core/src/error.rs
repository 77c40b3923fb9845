use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("radius {radius} exceeds the half-side cap {cap}")]
    RadiusCap { radius: f64, cap: f64 },

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("exponent relation 1/s = 1/p + 1/q violated (max residual {max_residual:e})")]
    ExponentRelation { max_residual: f64 },

    #[error("weight must be positive and finite; found {value} at point {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("operator is not positive definite: smallest eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("no type result covers {operator} with q = {q}, d = {d}")]
    UncoveredType { operator: String, q: f64, d: usize },

    #[error(
        "search lattice exhausted; best infeasible point c = {c}, N = {n}, violation = {violation:e}"
    )]
    LatticeExhausted { c: f64, n: f64, violation: f64 },

    #[error("majorant tail {tail:e} exceeds tolerance {tolerance:e} with {terms} terms")]
    TailTolerance {
        tail: f64,
        tolerance: f64,
        terms: usize,
    },

    #[error("floor function has weighted norm {0} > 1")]
    FloorNorm(f64),

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
