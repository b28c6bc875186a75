use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions before reaching the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// No secondary strategy can keep the primary tier at its QoS target.
    #[error(
        "infeasible: primary-only connection probability at R/2 is {primary_only:.6}, below the required {required:.6}"
    )]
    Infeasible { primary_only: f64, required: f64 },

    #[error("invalid scenario:\n{0}")]
    InvalidScenario(ValidationReport),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
