//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field out of supported range: {0}")]
    FieldOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty layer list: transport needs at least one material layer")]
    EmptyLayerList,

    #[error("non-finite energy during transport (ion {ion}, step {step}): {detail}")]
    NonFiniteEnergy {
        ion: u64,
        step: u64,
        detail: String,
    },

    #[error("all spectrum points were filtered out (2*p0 - 1 outside ({eps}, {})); nothing to decompose", 1.0 - eps)]
    EmptySpectrum { eps: f64 },

    #[error("inconsistent relaxation channel pair: gamma = {gamma_hz} Hz < 0 (T1_dq too long for T1_sq)")]
    InconsistentRates { gamma_hz: f64 },

    #[error("fit did not converge after {iterations} iterations (residual norm {residual_norm})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("NMR dip undetectable: {0}")]
    Undetectable(String),

    #[error("readout too noisy for any depth: requires c*sqrt(n0) > 2e^2 ~ 14.78, got {0:.3}")]
    ReadoutTooNoisy(f64),

    #[error("parse error in {path} line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("format version mismatch in {path}: file declares {found}, this build reads {expected}")]
    VersionMismatch {
        path: String,
        found: String,
        expected: String,
    },

    #[error("record with undetermined depth has mask thickness {t_nm} nm outside the grouping")]
    UngroupedRecord { t_nm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable error code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::FieldOutOfRange(_) => "field_out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::EmptyLayerList => "empty_layer_list",
            Error::NonFiniteEnergy { .. } => "non_finite_energy",
            Error::EmptySpectrum { .. } => "empty_spectrum",
            Error::InconsistentRates { .. } => "inconsistent_rates",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Undetectable(_) => "undetectable",
            Error::ReadoutTooNoisy(_) => "readout_too_noisy",
            Error::Parse { .. } => "parse_error",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::UngroupedRecord { .. } => "ungrouped_record",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}
