//! Crate-wide error type and result alias.

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("configuration: {0}")]
    Config(String),

    /// Input data that fails a file-level validation check.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A statement date that does not fall inside any fiscal-year window.
    #[error("date {date} falls outside every fiscal-year window (window = {window_months} months)")]
    UnassignableDate { date: NaiveDate, window_months: u32 },

    /// Cosine similarity is undefined for a zero-norm vector.
    #[error("cosine similarity undefined: zero-norm vector")]
    ZeroNorm,

    /// Cosine magnitude beyond 1 by more than the domain tolerance.
    #[error("cosine value {0} outside [-1, 1]")]
    CosineOutOfRange(f64),

    /// Modularity is undefined on a graph without edge weight.
    #[error("graph has zero total weight; modularity is undefined")]
    ZeroWeightGraph,

    /// Node lookup by bank id failed.
    #[error("unknown node '{0}'")]
    UnknownNode(String),

    /// Pearson correlation is undefined for a constant series.
    #[error("series '{0}' is constant; correlation is undefined")]
    ConstantSeries(String),

    /// Too few paired observations for a correlation test.
    #[error("need at least {min} paired observations, got {n}")]
    InsufficientSample { n: usize, min: usize },

    /// Not enough rows/columns for a fit or a graph build.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The component-retention rule kept nothing; callers may retain the
    /// first component as a documented fallback.
    #[error("no principal component passed the retention rule; retain at least the first component")]
    NoRetainedComponents,

    /// A stage was invoked before the stage that produces its input.
    #[error("missing prerequisite artifact: {0} (run the stage that produces it first)")]
    MissingArtifact(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An internal invariant was violated; indicates a bug.
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

/// Coarse classification used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Io,
    Internal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Internal(_) => ErrorCategory::Internal,
            _ => ErrorCategory::Validation,
        }
    }
}
