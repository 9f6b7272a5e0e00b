use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, bad config, unreadable or malformed input files.
    Usage,
    /// Well-formed input that the numerical method cannot handle.
    Domain,
    /// Everything else (I/O while writing, training failures).
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("degenerate interval between samples {index} and {next} (dt = {dt})")]
    DegenerateInterval { index: usize, next: usize, dt: f64 },
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no samples fall inside the sequence window")]
    EmptyWindow,
    #[error("invalid band specification: {0}")]
    BandSpec(String),
    #[error("filter design failed: {0}")]
    FilterDesign(String),
    #[error("series of length {len} is too short for padding of {pad} samples")]
    InsufficientLength { len: usize, pad: usize },
    #[error("irregular sampling at sample {index}: interval {dt} s deviates from {expected} s by more than 1%")]
    IrregularSampling { index: usize, dt: f64, expected: f64 },

    #[error("{path}: nifti {field}: {reason}")]
    Nifti {
        path: PathBuf,
        field: &'static str,
        reason: String,
    },
    #[error("{path}: unsupported nifti datatype code {code}")]
    UnsupportedDatatype { path: PathBuf, code: i16 },
    #[error("{path}: tracking log row {row}: {reason}")]
    TrackingLog {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("{path}: timestamps not strictly increasing at row {row}")]
    NonMonotonic { path: PathBuf, row: usize },
    #[error("{path}: manifest row {row}: {reason}")]
    Manifest {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("duplicate volume path in manifest: {0}")]
    DuplicateVolume(String),
    #[error("unknown split {0:?} (expected train, validation or test)")]
    UnknownSplit(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("checkpoint {0}: checksum mismatch")]
    ChecksumMismatch(PathBuf),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("infinite loss: target bin {bin} has mass {target} but predicted probability is zero")]
    InfiniteLoss { bin: usize, target: f64 },
    #[error("non-finite activation in layer {0}")]
    NonFiniteActivation(String),
    #[error("backward called without a training-mode forward cache")]
    MissingCache,

    #[error("need at least {needed} samples, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("constant input: {0}")]
    ConstantInput(&'static str),
    #[error("volume has no edges")]
    NoEdges,
    #[error("single-class input: both classes must be non-empty")]
    SingleClass,
    #[error("missing covariate {name:?} for: {}", .paths.join(", "))]
    MissingCovariate { name: String, paths: Vec<String> },
    #[error("missing entries: {}", .0.join(", "))]
    MissingEntries(Vec<String>),
    #[error("empty split: {0}")]
    EmptySplit(&'static str),
    #[error("missing label for {0}")]
    MissingLabel(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Nifti { .. }
            | UnsupportedDatatype { .. }
            | TrackingLog { .. }
            | NonMonotonic { .. }
            | Manifest { .. }
            | DuplicateVolume(_)
            | UnknownSplit(_)
            | Checkpoint { .. }
            | ChecksumMismatch(_)
            | Config(_)
            | Csv { .. }
            | MissingEntries(_)
            | MissingCovariate { .. }
            | EmptySplit(_)
            | MissingLabel(_) => ErrorKind::Usage,
            Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorKind::Usage,
            Io { .. } | NonFiniteActivation(_) | MissingCache => ErrorKind::Runtime,
            _ => ErrorKind::Domain,
        }
    }
}
