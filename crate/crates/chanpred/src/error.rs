use std::io;
use std::path::{Path, PathBuf};

use chanpred_core::error::Category;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] chanpred_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: corrupt file at byte offset {offset}: {msg}")]
    Integrity { path: PathBuf, offset: u64, msg: String },
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Core(e) => e.category(),
            Error::Config(_) => Category::Config,
            Error::Io { .. } | Error::Integrity { .. } => Category::Data,
            Error::Context { source, .. } => source.category(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            Category::Config => 2,
            Category::Data => 3,
            Category::Numeric => 4,
        }
    }
}
