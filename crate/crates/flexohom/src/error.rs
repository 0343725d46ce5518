use std::path::PathBuf;

/// A configuration problem, located by a dotted field path when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", field.as_deref().map(|f| format!("{f}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self { field: Some(field.to_string()), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self { field: None, message: message.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },

    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] flexohom_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for configuration, 3 for assembly or solve,
    /// 4 for file system failures.
    pub fn exit_code(&self) -> i32 {
        use flexohom_core::Error as E;
        match self {
            AppError::Parse { .. } | AppError::Config(_) => 2,
            AppError::Core(E::SelfOverlap { .. } | E::InvalidBasis(_) | E::Material(_) | E::Conditioning(_) | E::Config(_) | E::NotOrthogonal { .. }) => 2,
            AppError::Core(_) => 3,
            AppError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
