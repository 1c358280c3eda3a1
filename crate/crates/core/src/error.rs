use std::path::PathBuf;

use crate::env::Domain;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("replay buffer for {0} domain is empty")]
    EmptyBuffer(Domain),

    #[error("ratio undefined: p_src = 0 but p_trg = {p_trg} for (s={s}, a={a}, s'={next})")]
    SupportViolation {
        s: usize,
        a: usize,
        next: usize,
        p_trg: f64,
    },

    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

impl Error {
    pub fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 for configuration problems,
    /// 2 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
