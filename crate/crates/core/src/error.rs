//! Crate-wide error type.
//!
//! Every failure carries a short machine-parsable class (used by the CLI for
//! its one-line error output) plus a human-readable message.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Invalid configuration (violated invariant, bad preset, bad flag combination).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor/vector dimensions do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Geometric precondition violated (antenna inside the imaging domain, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Linear solver failed; carries the last relative residual when known.
    #[error("solver error: {message} (residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        message: String,
        residual: f64,
        iterations: usize,
    },

    /// Random scatterer synthesis exhausted its retry budget.
    #[error("generation error: {0}")]
    Generation(String),

    /// Optimizer received a non-finite gradient or loss.
    #[error("optimizer error: {0}")]
    Optimizer(String),

    /// Analytic oracle failed to converge.
    #[error("oracle error: {0}")]
    Oracle(String),

    /// Stored data fails its integrity checks.
    #[error("corruption error: {0}")]
    Corruption(String),

    /// File exists but is not in the expected format/version.
    #[error("format error: {0}")]
    Format(String),

    /// Incompatible model checkpoints wired together.
    #[error("integration error: {0}")]
    Integration(String),

    /// Metric undefined for the given inputs (e.g. R^2 against constant truth).
    #[error("metric error: {0}")]
    Metric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable one-word class, for machine-parsable CLI error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Geometry(_) => "geometry",
            Error::Solver { .. } => "solver",
            Error::Generation(_) => "generation",
            Error::Optimizer(_) => "optimizer",
            Error::Oracle(_) => "oracle",
            Error::Corruption(_) => "corruption",
            Error::Format(_) => "format",
            Error::Integration(_) => "integration",
            Error::Metric(_) => "metric",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
