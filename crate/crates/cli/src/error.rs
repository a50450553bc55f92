use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] rom8t::Error),

    #[error("{0}")]
    Threshold(String),

    #[error("calibration of {what} infeasible: best worst-case margin {best_margin:.4e} V, required {required:.4e} V")]
    Infeasible {
        what: String,
        best_margin: f64,
        required: f64,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Threshold(_) => 2,
            CliError::Infeasible { .. } => 3,
            CliError::Core(rom8t::Error::CalibrationInfeasible { .. }) => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
