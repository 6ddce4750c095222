use std::io;

use pilc_core::Error as CoreError;

pub type Result<T, E = PilcError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PilcError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated input: {0}")]
    Truncated(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    /// The container names a model other than the one supplied.
    #[error("model hash mismatch: container {expected}, model {found}")]
    ModelHashMismatch { expected: String, found: String },
    #[error("a model is required: {0}")]
    ModelRequired(String),
    #[error("model file digest does not match its contents")]
    ModelDigest,
    #[error("corrupt {stream} stream: {source}")]
    Corrupt {
        stream: &'static str,
        source: CoreError,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PilcError {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            PilcError::Io(_) => 3,
            PilcError::BadMagic { .. }
            | PilcError::UnsupportedVersion(_)
            | PilcError::Truncated(_)
            | PilcError::Malformed(_) => 4,
            PilcError::Corrupt { .. } => 5,
            PilcError::ModelHashMismatch { .. }
            | PilcError::ModelRequired(_)
            | PilcError::ModelDigest => 6,
            PilcError::Unsupported(_) => 7,
            PilcError::Core(e) => match e {
                CoreError::Malformed(_) => 4,
                CoreError::CorruptStream { .. }
                | CoreError::StreamUnderflow
                | CoreError::StateOutOfRange(_) => 5,
                CoreError::Model(_) => 6,
                _ => 1,
            },
        }
    }

    /// True for outcomes that signal tampered or damaged input rather than
    /// misuse.
    pub fn is_data_error(&self) -> bool {
        matches!(self.exit_code(), 4..=6)
    }
}
