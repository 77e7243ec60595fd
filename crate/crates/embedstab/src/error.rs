use std::path::PathBuf;

use embedstab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Input that parses but cannot be used.
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Core { context: String, source: CoreError },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ToolError>;

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        ToolError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Usage(_) => 2,
            ToolError::Core {
                source: CoreError::Numerical(_) | CoreError::Degenerate(_),
                ..
            } => 4,
            _ => 3,
        }
    }
}

impl From<CoreError> for ToolError {
    fn from(source: CoreError) -> Self {
        ToolError::Core {
            context: "error".into(),
            source,
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| ToolError::Core {
            context: what(),
            source,
        })
    }
}
