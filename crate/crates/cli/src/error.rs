use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flag, config key, or input path.
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error(transparent)]
    Core(#[from] asa_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// The command ran but its check did not pass.
    #[error("{0}")]
    Failed(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// 1 for validation errors, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        use asa_core::Error as E;
        match self {
            CliError::Invalid { .. } => 1,
            CliError::Core(E::Invalid { .. } | E::Format(_)) => 1,
            CliError::Core(_) | CliError::Io { .. } | CliError::Failed(_) => 2,
        }
    }
}

pub fn invalid(key: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Invalid {
        key: key.into(),
        msg: msg.into(),
    }
}

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
