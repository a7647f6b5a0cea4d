use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field does not decay at the grid boundary: |f| = {boundary:e} exceeds {tolerance:e}")]
    Truncation { boundary: f64, tolerance: f64 },

    #[error("frequency {frequency} beyond the grid Nyquist band {nyquist}")]
    Resolution { frequency: f64, nyquist: f64 },

    #[error("quadrature did not converge: value {value}, error estimate {error:e}")]
    NonConvergence { value: f64, error: f64 },

    #[error("argument |z| = {modulus} outside the stable range {limit}")]
    Range { modulus: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{0} has no regular P function")]
    NoRegularForm(String),

    #[error("overflow evaluating {0}")]
    Overflow(String),

    #[error("series pairing diverges: {0}")]
    Divergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("field is not real: imaginary residue {residue:e}")]
    ComplexResidue { residue: f64 },

    #[error("kernel lacks compact support for a growing characteristic function")]
    Support,

    #[error("characteristic function requested at |beta| = {modulus} beyond the Fock validity band {band}")]
    FockBand { modulus: f64, band: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Warning {
    /// The truncated part of a Fock expansion exceeds the reporting threshold.
    Truncation { what: String, loss: f64 },
}
