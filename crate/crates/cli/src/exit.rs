//! Process exit codes.

use panto_core::Error;
use thiserror::Error;

pub const OK: i32 = 0;
pub const CONFIG: i32 = 2;
pub const REGIME: i32 = 3;
pub const VERDICT: i32 = 4;
pub const NUMERIC: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("unsupported regime: {0}")]
    Regime(String),
    #[error("verdict failed")]
    Verdict,
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => CONFIG,
            CliError::Regime(_) => REGIME,
            CliError::Verdict => VERDICT,
            CliError::Numeric(_) => NUMERIC,
        }
    }

    /// Sorts a library error into the exit-code classes.
    pub fn from_core(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::QOutOfRange(_)
            | Error::DuplicateDelay(..)
            | Error::DimensionMismatch(_)
            | Error::DimensionTooLarge(_)
            | Error::NonFinite(_)
            | Error::InvalidInitial(_)
            | Error::StepTooLarge { .. }
            | Error::Domain(_)
            | Error::InsufficientNodes { .. } => CliError::Config(msg),
            Error::Regime(_) | Error::DegenerateB | Error::RegimeMismatch(_) | Error::Spectrum(_) => {
                CliError::Regime(msg)
            }
            Error::WrongBranch(_)
            | Error::LyapunovFailure(_)
            | Error::SingularSystem
            | Error::NotSymmetric(_)
            | Error::ConvergenceFailure(_)
            | Error::GridMismatch
            | Error::EmptyEnsemble
            | Error::NonpositiveMoment(..)
            | Error::Io(_) => CliError::Numeric(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numeric(format!("json: {e}"))
    }
}
