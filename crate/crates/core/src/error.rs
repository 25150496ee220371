use thiserror::Error;

/// Errors raised by model validation, analysis, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("delay factor {0} is outside the open interval (0, 1)")]
    QOutOfRange(f64),
    #[error("delay factor {0} appears more than once in the {1} list")]
    DuplicateDelay(f64, &'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::linalg::MAX_DIM)]
    DimensionTooLarge(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("all delayed coefficients vanish; the equation has no delayed feedback")]
    DegenerateB,
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    Spectrum(f64),
    #[error("Lyapunov solve failed: relative residual {0:e}")]
    LyapunovFailure(f64),
    #[error("singular linear system")]
    SingularSystem,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("step size {h} too large (limit {limit})")]
    StepTooLarge { h: f64, limit: f64 },
    #[error("invalid initial condition: {0}")]
    InvalidInitial(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solutions are not defined on the same grid")]
    GridMismatch,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("only {found} nodes inside the fit window, need {needed}")]
    InsufficientNodes { found: usize, needed: usize },
    #[error("moment estimate {0} at t = {1} is not positive")]
    NonpositiveMoment(f64, f64),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("i/o: {0}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
