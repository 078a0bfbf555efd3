use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimator undefined: p_f + p_m = 1 (p_f = {p_f}, p_m = {p_m})")]
    UndefinedEstimator { p_f: f64, p_m: f64 },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("refused: {what} is limited to N <= {max}, got N = {n}")]
    Refused { what: &'static str, n: usize, max: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("sample source exhausted after {0} samples")]
    SourceExhausted(usize),
    #[error("safety cap of {0} samples reached before any termination condition")]
    SafetyCap(usize),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by invalid input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::UndefinedEstimator { .. }
                | Error::Refused { .. }
                | Error::Infeasible(_)
                | Error::Parse(_)
        )
    }

    #[cfg_attr(not(feature = "harness"), allow(dead_code))]
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
