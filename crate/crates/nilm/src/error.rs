use std::path::{Path, PathBuf};

/// Errors surfaced by the command-line front end, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] nilm_core::Error),
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: nilm_core::Error },
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("writing {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    /// 1 usage/config, 2 data validation, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Core(e) if e.is_data_error() => 2,
            AppError::Core(_) => 1,
            AppError::InFile { source, .. } if source.is_data_error() => 2,
            AppError::InFile { .. } => 1,
            AppError::Read { .. } | AppError::Parse { .. } => 2,
            AppError::Write { .. } | AppError::Internal(_) => 3,
        }
    }

    pub fn read(path: &Path, source: std::io::Error) -> Self {
        AppError::Read {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        AppError::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// A csv error while reading `path`.
    pub fn csv(path: &Path, err: csv::Error) -> Self {
        let line = err.position().map_or(0, |p| p.line());
        match err.into_kind() {
            csv::ErrorKind::Io(e) => AppError::read(path, e),
            other => AppError::parse(path, line, format!("{other:?}")),
        }
    }
}
