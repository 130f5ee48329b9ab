use thiserror::Error;

use crate::dynamics::State;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corrupted field: {0}")]
    CorruptedField(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("insufficient truncation radius: remainder estimate {remainder:e} exceeds tolerance {tol:e}")]
    InsufficientTruncation { remainder: f64, tol: f64 },

    #[error("divergent singularity: {0}")]
    DivergentSingularity(String),

    #[error("positivity violation: min u = {0:e}")]
    Positivity(f64),

    #[error("blow-up detected at t = {t}")]
    BlowUp { t: f64, last_valid: Box<State> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("oracle inconsistency: {0}")]
    OracleInconsistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("eigensolver did not converge: residual {residual:e}")]
    Convergence { residual: f64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }
}
