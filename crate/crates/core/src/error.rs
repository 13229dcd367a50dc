use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and estimation layers.
///
/// Parameter errors carry a dotted `field` path relative to the object being
/// validated so front ends can point at the offending config entry.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("supercritical model: E[kappa] = {mean_kappa} must be < 1 (field `{field}`)")]
    SupercriticalModel { field: String, mean_kappa: f64 },

    #[error("infinite mean: tail index {alpha} must exceed 1 (field `{field}`)")]
    InfiniteMean { field: String, alpha: f64 },

    #[error("model is a {found} regime but a {expected} regime is required")]
    WrongModelKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("target {target} does not apply to a {kind} model")]
    IncompatibleTarget {
        target: &'static str,
        kind: &'static str,
    },

    #[error("{what} has no closed form and the Monte Carlo oracle cache is disabled")]
    NoClosedForm { what: String },

    #[error("cluster overflow in replication {replication}: more than {limit} events")]
    ClusterOverflow { replication: u64, limit: usize },

    #[error("only {found} exceedances above x = {x} (need {required})")]
    InsufficientExceedances {
        x: f64,
        found: usize,
        required: usize,
    },

    #[error("degenerate tail: the top {k} order statistics are all equal")]
    DegenerateTail { k: usize },

    #[error("unstable estimate at s = {s}: relative standard error {rel_se:.3} exceeds 0.25")]
    UnstableEstimate { s: f64, rel_se: f64 },

    #[error("marks are not on a common lattice: {0}")]
    LatticeMismatch(String),

    #[error("bracket width {width} exceeds tolerance {tolerance}")]
    BracketTooWide { width: f64, tolerance: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed oracle cache {path}: {reason}")]
    CorruptCache { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefix the field path of parameter errors with `parent.`.
    pub fn within(self, parent: &str) -> Self {
        let join = |field: String| {
            if field.is_empty() {
                parent.to_string()
            } else {
                format!("{parent}.{field}")
            }
        };
        match self {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: join(field),
                reason,
            },
            Error::SupercriticalModel { field, mean_kappa } => Error::SupercriticalModel {
                field: join(field),
                mean_kappa,
            },
            Error::InfiniteMean { field, alpha } => Error::InfiniteMean {
                field: join(field),
                alpha,
            },
            other => other,
        }
    }

    /// Dotted path of the offending field, when the error has one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::InvalidParameter { field, .. }
            | Error::SupercriticalModel { field, .. }
            | Error::InfiniteMean { field, .. } => Some(field),
            _ => None,
        }
    }
}
