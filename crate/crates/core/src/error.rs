use std::path::PathBuf;

use neurodecode_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("band {low}-{high} Hz outside (0, {nyquist}) Hz")]
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },
    #[error("sample rate {rate} Hz is not an integer multiple of {target} Hz")]
    DecimationFactor { rate: u32, target: u32 },
    #[error("epoch has no baseline samples")]
    EmptyBaseline,
    #[error("expected {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("payload longer than declared: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("metadata has {meta} entries but the tensor holds {tensor} trials")]
    LengthMismatch { meta: usize, tensor: usize },
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown subject {0}")]
    UnknownSubject(u32),
    #[error("cannot split {n} trials with test fraction {frac}")]
    SplitTooSmall { n: usize, frac: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need both classes, found only class {0}")]
    SingleClass(usize),
    #[error("composite covariance is not positive definite")]
    SingularCovariance,

    #[error("empty split")]
    EmptySplit,
    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("empty history")]
    EmptyHistory,
    #[error("length mismatch: {0} vs {1}")]
    Mismatch(usize, usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures caused by numerics (non-finite values, singular matrices),
    /// as opposed to bad input data or arguments.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::SingularCovariance
                | Error::Autodiff(AutodiffError::NonFinite { .. })
                | Error::Autodiff(AutodiffError::NonDeterministic { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
