//! Shared error type for the factorization library.

use thiserror::Error;

/// Errors produced by grid construction, transforms, and the factorization
/// pipeline. Variants carry enough context to locate the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expected a {expected:?}-domain function, got {got:?}")]
    WrongDomain {
        expected: crate::grid::Domain,
        got: crate::grid::Domain,
    },

    #[error("input must be real-valued: max |Im| = {max_imag:.3e} exceeds {tol:.3e}")]
    NotRealValued { max_imag: f64, tol: f64 },

    #[error("input must be positive: {context}")]
    NotPositive { context: String },

    #[error("frequency {freq} is not on the lattice with spacing {tau} (tolerance {tol:.1e})")]
    OffLattice { freq: f64, tau: f64, tol: f64 },

    #[error("spectral support [{a}, {b}) is not aligned with the frequency grid (spacing {dxi:.6e})")]
    MisalignedSupport { a: f64, b: f64, dxi: f64 },

    #[error(
        "spectral leakage {leaked:.3e} outside [{a}, {b}) exceeds {tol:.3e}; enlarge the support"
    )]
    LeakageTooLarge { a: f64, b: f64, leaked: f64, tol: f64 },

    #[error("log-integral test indicates no spectral factor exists: {context}")]
    PaleyWienerDiverged { context: String },

    #[error("density is not positive definite at t = {t} (sample {sample}): leading minor {minor} has pivot {pivot:.6e}")]
    PivotFailure {
        t: f64,
        sample: usize,
        minor: usize,
        pivot: f64,
    },

    #[error("corner coefficient degenerate: |c0| = {c0_abs:.3e} below threshold {threshold:.3e}")]
    DegenerateCorner { c0_abs: f64, threshold: f64 },

    #[error("completion solver failed after {restarts} restarts: best residuals unitary {unitary:.3e}, det {det:.3e}, analytic {analytic:.3e}")]
    SolverFailure {
        restarts: usize,
        unitary: f64,
        det: f64,
        analytic: f64,
    },

    #[error("unsupported problem size: {0}")]
    UnsupportedSize(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
