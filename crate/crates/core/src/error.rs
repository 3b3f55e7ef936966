//! Error types shared across the engine.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Top-level engine error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration, including schedule rule violations.
    #[error("configuration error: {0}")]
    Config(String),

    /// Budget ledger misuse (non-monotone call ids, malformed records).
    #[error("ledger error: {0}")]
    Ledger(String),

    /// Prompt payload does not match the requested template kind.
    #[error("prompt error: {0}")]
    Prompt(String),

    /// A model backend failed after its retry policy was exhausted.
    #[error(transparent)]
    Backend(#[from] BackendError),

    /// Dataset ingestion failure, pinned to a line when known.
    #[error("dataset error at {path}:{line}: {msg}")]
    Dataset {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Filesystem failure, annotated with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// External verifier plugin failure.
    #[error("verifier plugin error: {0}")]
    Verifier(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Backend-level failure. Length-cap exhaustion is not an error; it is
/// reported through `Completion::finish`.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempts: {msg}")]
    Transport { attempts: u32, msg: String },

    #[error("http status {status} after {attempts} attempts: {msg}")]
    Http {
        status: u16,
        attempts: u32,
        msg: String,
    },

    /// The provider response lacked usage counts; usage is never fabricated.
    #[error("response missing usage fields: {0}")]
    MissingUsage(String),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    /// Required API key environment variable is unset.
    #[error("missing environment variable {0}")]
    MissingEnv(String),

    /// Scripted backend has no completion stored for the requested key.
    #[error("no scripted completion for round={round} branch={branch} kind={kind}")]
    ScriptMiss {
        round: u32,
        branch: u32,
        kind: String,
    },

    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}
