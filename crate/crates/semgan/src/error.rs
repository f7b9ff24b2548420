use std::path::{Path, PathBuf};

/// Errors raised by the harness. Every file-related variant names its file.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] semgan_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents are unusable.
    #[error("{}: {msg}", path.display())]
    File { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("training diverged at step {step}: {detail} (last finite losses: d_loss {d_loss}, g_loss {g_loss})")]
    Diverged {
        step: u64,
        detail: String,
        d_loss: f64,
        g_loss: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn file(path: &Path, msg: impl std::fmt::Display) -> Self {
        Error::File {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }

    /// Process exit code: 2 for usage and configuration errors, 3 for
    /// runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(semgan_core::Error::Config(_)) => 2,
            _ => 3,
        }
    }
}
