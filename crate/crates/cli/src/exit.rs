//! Process exit codes, one per failure class.

use discourse_core::Error;

pub const OK: u8 = 0;
/// Anything not classified below.
pub const FAILURE: u8 = 1;
/// Unknown flag or malformed arguments (clap's own code).
pub const USAGE: u8 = 2;
/// The config file is unreadable or invalid.
pub const CONFIG: u8 = 3;
/// An input or output file could not be read or written.
pub const IO: u8 = 4;
/// Stored features, checkpoint and manifest disagree, or a checkpoint
/// failed its integrity check.
pub const MANIFEST: u8 = 5;
/// An earlier pipeline stage has not run, or there is too little history.
pub const NOT_READY: u8 = 6;
/// Input data is malformed or unusable.
pub const DATA: u8 = 7;
/// Training produced a non-finite loss.
pub const DIVERGED: u8 = 8;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => IO,
        Error::ManifestMismatch(_) | Error::Integrity(_) => MANIFEST,
        Error::InsufficientHistory { .. } => NOT_READY,
        Error::Diverged { .. } => DIVERGED,
        Error::InvalidInput(_)
        | Error::EmptyVocabulary(_)
        | Error::MissingScores(_)
        | Error::MissingEmbedding(_)
        | Error::Degenerate(_)
        | Error::MissingBlock(_)
        | Error::Corrupt { .. }
        | Error::Json(_) => DATA,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new(code_for(&e), e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        let code = error.downcast_ref::<Error>().map_or(FAILURE, code_for);
        Self { code, error }
    }
}
