use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dexp is near-singular: |x| = {norm:.6} is within the guard band of a multiple of 2π")]
    NearSingular { norm: f64 },

    #[error("requested tip rotation |log R| = {norm:.6} lies outside the principal branch guard")]
    BranchGuard { norm: f64 },

    #[error("invalid rod geometry: {0}")]
    InvalidGeometry(String),

    #[error("integration diverged at tau = {tau:.4}")]
    IntegrationDiverged { tau: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate gripper frame: {0}")]
    Frame(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
