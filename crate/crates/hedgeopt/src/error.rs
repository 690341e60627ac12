//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside an operation's domain (non-finite entries,
    /// dimension mismatches, nonpositive prices, bad parameters, ...).
    #[error("input domain: {0}")]
    InputDomain(String),

    /// LU elimination met a pivot too small to trust.
    #[error("singular matrix: pivot magnitude {pivot:.3e} below threshold {threshold:.3e}")]
    Singular { pivot: f64, threshold: f64 },

    /// A matrix required to be positive semi-definite was not.
    #[error("matrix not positive semi-definite: min eigenvalue {min_eigenvalue:.3e}{context}")]
    NotPsd {
        min_eigenvalue: f64,
        /// Extra context such as the offending schedule date.
        context: String,
    },

    /// Greeks requested at or past maturity.
    #[error("greeks requested at t = {t} but maturity is {maturity}")]
    Maturity { t: f64, maturity: f64 },

    /// The lower-bound integral vanished, so the beta ratio is undefined.
    #[error("degenerate lower bound {lower_bound:.3e}: beta ratio undefined")]
    DegenerateBound { lower_bound: f64 },

    /// A matrix parsed from user input was not symmetric.
    #[error("asymmetric input: entry ({i},{j}) = {aij} but ({j},{i}) = {aji}")]
    Asymmetric { i: usize, j: usize, aij: f64, aji: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
