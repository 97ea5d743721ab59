use std::path::PathBuf;

/// Errors produced by the numerical routines, estimators and I/O helpers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("estimator `{estimator}` expects a {expected} batch, got {actual}")]
    KindMismatch {
        estimator: &'static str,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("weight vector has {weights} entries but the batch has {samples} samples")]
    LengthMismatch { weights: usize, samples: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of an iterative numerical method to converge.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
