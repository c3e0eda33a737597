//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors produced by graph construction, numerical routines, and file ingest.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Structurally invalid input: asymmetric matrices, dimension mismatches,
    /// duplicate labels, out-of-range indices.
    #[error("structural input error: {0}")]
    Structural(String),

    /// A parameter outside its documented domain (gamma <= 0, B < 100, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical routine failed (factorization breakdown, non-convergence).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Invalid data value (NaN weight, correlation outside [-1, 1], ...).
    #[error("input error: {0}")]
    Input(String),

    /// The graphical-lasso solver ran out of sweeps. Carries the residual
    /// (max parameter change in the last sweep) so callers can inspect how
    /// close the last iterate was.
    #[error("glasso did not converge within {sweeps} sweeps (last residual {residual:.3e})")]
    DidNotConverge { sweeps: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
