use serde::Serialize;

use cluster_tails_core::Error as CoreError;

/// Category of a failed run; each maps to its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    ConfigError,
    ModelError,
    RuntimeError,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::ConfigError => 2,
            ErrorKind::ModelError => 3,
            ErrorKind::RuntimeError => 4,
        }
    }
}

/// Machine-readable error record printed on failure.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct CliError {
    #[serde(rename = "error")]
    pub kind: ErrorKind,
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::ConfigError,
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::RuntimeError,
            field: None,
            message: message.into(),
        }
    }

    /// Classify a core error raised while handling the config entry `parent`.
    pub fn from_core(e: CoreError, parent: &str) -> Self {
        let e = if parent.is_empty() {
            e
        } else {
            e.within(parent)
        };
        let kind = match &e {
            CoreError::InvalidParameter { .. } => ErrorKind::ConfigError,
            CoreError::SupercriticalModel { .. }
            | CoreError::InfiniteMean { .. }
            | CoreError::WrongModelKind { .. }
            | CoreError::IncompatibleTarget { .. }
            | CoreError::NoClosedForm { .. }
            | CoreError::LatticeMismatch(_) => ErrorKind::ModelError,
            _ => ErrorKind::RuntimeError,
        };
        let field = e.field().map(str::to_string).or_else(|| match &e {
            CoreError::WrongModelKind { .. }
            | CoreError::IncompatibleTarget { .. }
            | CoreError::NoClosedForm { .. } => Some(if parent.is_empty() {
                "model".to_string()
            } else {
                parent.to_string()
            }),
            _ => None,
        });
        Self {
            kind,
            field,
            message: e.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error record serializes")
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::from_core(e, "")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
