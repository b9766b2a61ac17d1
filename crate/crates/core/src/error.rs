//! Error type shared by all library operations.

use thiserror::Error;

/// Errors produced by the numerical library.
///
/// Parameters are reported in `f64` regardless of the working precision; they
/// are diagnostics, not data.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Hurst parameter outside the supported open interval.
    #[error("hurst parameter {h} outside supported range ({lo}, {hi})")]
    InvalidHurst { h: f64, lo: f64, hi: f64 },

    /// A grid failed validation (non-positive horizon, zero cells, ...).
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {reason}")]
    GridMismatch { reason: String },

    /// A time that must be a grid node is not one.
    #[error("time {t} is not a node of the grid (step {dt})")]
    NotANode { t: f64, dt: f64 },

    /// Input data failed validation (step functions, solver configs, ...).
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },

    /// The operation is not defined for the given inputs.
    #[error("unsupported: {reason}")]
    Unsupported { reason: String },

    /// A numerical procedure failed (factorization, root find, ...).
    #[error("numerical failure in {context}: {reason}")]
    Numerical { context: &'static str, reason: String },

    /// A solution left the finite / bounded region the solver monitors.
    #[error("solution diverged at t = {t}: |x| = {magnitude} exceeds {threshold}")]
    Diverged { t: f64, magnitude: f64, threshold: f64 },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
