use std::path::PathBuf;

/// Errors produced anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in `{segment}`")]
    NonFinite { segment: String },

    #[error("structure mismatch: {0}")]
    Structure(String),

    #[error("label {label} out of range for {num_classes} classes (row {row})")]
    Label {
        row: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("group `{group}` needs {needed} records, has {available}")]
    InsufficientData {
        group: String,
        needed: usize,
        available: usize,
    },

    #[error("group `{0}` has no records")]
    EmptyGroup(String),

    #[error("row for target `{0}` has no defined cells")]
    EmptyRow(String),

    #[error("empty input")]
    EmptyInput,

    #[error("duplicate cell ({language}, {feature}) at lines {first_line} and {second_line}")]
    DuplicateCell {
        language: String,
        feature: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("feature `{feature}` has {available} labeled instances, need at least {needed}")]
    InsufficientLanguages {
        feature: String,
        needed: usize,
        available: usize,
    },

    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("checkpoint hash {found:016x} does not match configuration hash {expected:016x}")]
    StaleCheckpoint { expected: u64, found: u64 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
