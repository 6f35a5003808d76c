use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column `{column}`")]
    Parse { line: u64, column: String },
    #[error("missing header column `{0}`")]
    MissingHeader(String),
    #[error("bad model file: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] css_core::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for problems reading or writing files, 1 for
    /// everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Io { .. } | HarnessError::Parse { .. } | HarnessError::MissingHeader(_) | HarnessError::Model(_) => 2,
            HarnessError::Config(_) | HarnessError::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
