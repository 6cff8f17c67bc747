use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate camera geometry: {0}")]
    DegenerateGeometry(String),

    #[error("missing observation: {0}")]
    MissingObservation(String),

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("degenerate foot placement: projected ankle-toe distance {distance:.3} mm < {min:.3} mm")]
    DegeneratePlacement { distance: f64, min: f64 },

    #[error("empty pressure field (no cell above threshold)")]
    EmptyField,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, step {step}: {loss}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },

    #[error("need at least 2 subjects, found {0}")]
    InsufficientSubjects(usize),

    #[error("stream misalignment at frame {0}")]
    StreamMisalignment(i64),

    #[error("series too short: longest valid segment {longest} < {required} samples")]
    SeriesTooShort { longest: usize, required: usize },

    #[error("no valid frames")]
    NoValidFrames,

    #[error("empty input")]
    EmptyInput,

    #[error("zero variance")]
    ZeroVariance,

    #[error("{n} paired samples, need at least {min}")]
    TooFewSamples { n: usize, min: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}: {reason}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("alignment error at frame index {index}: {reason}")]
    Alignment { index: i64, reason: String },

    #[error("take {take} excluded: {reason}")]
    Excluded { take: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(file: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::MissingObservation(_) => "MissingObservation",
            Error::FrameMismatch(_) => "FrameMismatch",
            Error::DegeneratePlacement { .. } => "DegeneratePlacement",
            Error::EmptyField => "EmptyField",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyDataset => "EmptyDataset",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::InsufficientSubjects(_) => "InsufficientSubjects",
            Error::StreamMisalignment(_) => "StreamMisalignment",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::NoValidFrames => "NoValidFrames",
            Error::EmptyInput => "EmptyInput",
            Error::ZeroVariance => "ZeroVariance",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::InvalidProgram(_) => "InvalidProgram",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse { .. } => "ParseError",
            Error::Alignment { .. } => "AlignmentError",
            Error::Excluded { .. } => "Excluded",
            Error::Io { .. } => "IoError",
        }
    }
}
