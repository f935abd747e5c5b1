use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("malformed sidecar {path}: {msg}")]
    MalformedSidecar { path: PathBuf, msg: String },
    #[error("channel count mismatch: {0}")]
    ChannelCountMismatch(String),
    #[error("truncated payload: {0}")]
    TruncatedPayload(String),
    #[error("non-finite sample in channel {channel} at index {index}")]
    NonFiniteSample { channel: usize, index: usize },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("missing file for subject {subject:?}: {path}")]
    MissingFile { subject: String, path: PathBuf },
    #[error("malformed band spec: {0}")]
    MalformedBand(String),

    #[error("filter design failed: {0}")]
    FilterDesign(String),
    #[error("sequence too short for edge padding: length {len}, need more than {padlen}")]
    SequenceTooShort { len: usize, padlen: usize },
    #[error("recording shorter than one segment: {n_samp} samples < {seg_len}")]
    RecordingTooShort { n_samp: usize, seg_len: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("NaN or infinite value in input")]
    NonFiniteInput,
    #[error("invalid partition config: {0}")]
    InvalidPartition(String),

    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("eigen solver did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("insufficient samples for t-test: {0} and {1} (need at least 2 each)")]
    InsufficientSamples(usize, usize),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature table holds a single group")]
    SingleGroup,

    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("inconsistent channel counts: {0} vs {1}")]
    InconsistentChannels(usize, usize),
    #[error("k = {k} invalid for training set of {n} rows")]
    InvalidK { k: usize, n: usize },
    #[error("training set holds a single class")]
    SingleClass,
    #[error("class {group} has {count} units, fewer than {folds} folds")]
    ClassSmallerThanFolds { group: String, count: usize, folds: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid coupling spec: {0}")]
    InvalidCoupling(String),

    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps `self` with the subject it occurred for.
    pub fn for_subject(self, subject: impl Into<String>) -> Self {
        Error::Subject {
            subject: subject.into(),
            source: Box::new(self),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
