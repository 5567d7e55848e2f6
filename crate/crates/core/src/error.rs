use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the decoding toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("label {label} at frame {frame} is outside the class space [0, {num_classes})")]
    ClassIndexOutOfRange {
        label: usize,
        frame: usize,
        num_classes: usize,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: u32, found: u32 },

    #[error("no label sequence satisfies the constraint set")]
    InfeasibleConstraints,

    #[error("dimension mismatch: {what} expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("exhaustive search over {num_classes}^{frames} sequences exceeds the oracle limit")]
    InstanceTooLarge { num_classes: usize, frames: usize },

    #[error("length mismatch{}: prediction has {pred} frames, ground truth has {gt}", video_suffix(.video))]
    LengthMismatch {
        video: Option<String>,
        pred: usize,
        gt: usize,
    },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no counterpart for {name} in {dir}")]
    MissingCounterpart { name: String, dir: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn video_suffix(video: &Option<String>) -> String {
    match video {
        Some(v) => format!(" in video {v}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 parse, 3 empty corpus, 4 dimension,
    /// 5 infeasible, 6 missing counterpart, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::SchemaVersionMismatch { .. } | Error::ClassIndexOutOfRange { .. } => 2,
            Error::EmptyCorpus => 3,
            Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => 4,
            Error::InfeasibleConstraints => 5,
            Error::MissingCounterpart { .. } => 6,
            Error::InstanceTooLarge { .. } | Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
