use thiserror::Error;

/// Errors raised by the bit-cell model, protocols and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid control waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid mode config: {0}")]
    InvalidMode(String),

    #[error("internal stack node solve did not converge at t = {time:e} s")]
    NonConvergence { time: f64 },

    #[error("strobe time {t_strobe:e} s outside trace range [0, {end:e}] s")]
    StrobeOutOfRange { t_strobe: f64, end: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("address ({row}, {col}) out of range for {rows}x{cols} array")]
    AddressOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode/state mismatch: {0}")]
    ModeMismatch(String),

    #[error("calibration infeasible: best worst-case margin {best_margin:.4e} V, required {required:.4e} V")]
    CalibrationInfeasible { best_margin: f64, required: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
