//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by grid construction, solvers and the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid size: {0}")]
    Size(String),
    #[error("invalid argument: {0}")]
    Arg(String),
    #[error("potential failed harmonicity check: residual {residual:.3e} exceeds {bound:.3e}")]
    Harmonicity { residual: f64, bound: f64 },
    #[error("profile not evaluable on [{min:.6}, {max:.6}]: {reason}")]
    Range { min: f64, max: f64, reason: String },
    #[error("singular radial operator for mode {m}: {reason}")]
    Singular { m: i32, reason: String },
    #[error("influence matrix singular for mode {m} (det {det:.3e})")]
    InfluenceSingular { m: i32, det: f64 },
    #[error("Neumann data incompatible: imbalance {imbalance:.3e} exceeds {bound:.3e}")]
    Compatibility { imbalance: f64, bound: f64 },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("bracket [{lo:.3e}, {hi:.3e}] does not change sign (alpha(lo) = {alpha_lo:.3e})")]
    Bracket { lo: f64, hi: f64, alpha_lo: f64 },
    #[error("degenerate minimal eigenvalue (multiplicity {multiplicity})")]
    Degenerate { multiplicity: usize },
    #[error("seed error: {0}")]
    Seed(String),
    #[error("CFL violation at t = {t:.6}: {cfl:.3} >= {limit:.3}")]
    CflViolation { t: f64, cfl: f64, limit: f64 },
    #[error("incompatible variant: {0}")]
    Variant(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error for key '{key}': {message}")]
    Validation { key: String, message: String },
    #[error("run has not converged: {0}")]
    NotConverged(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
