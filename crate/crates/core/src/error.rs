use thiserror::Error;

/// Errors raised by the signal-processing and statistics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sigma must be positive")]
    NonPositiveSigma,
    #[error("sample count {0} is not a positive integer")]
    NonIntegerSampleCount(f64),
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error("coalescence time outside segment")]
    CoalescenceOutsideSegment,
    #[error("PSD grid mismatch: {0}")]
    GridMismatch(String),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
    #[error("series too short: {0}")]
    SeriesTooShort(String),
    #[error("zero-variance input, PSD would be zero")]
    ZeroVariance,
    #[error("overlap out of range: {0}")]
    OverlapOutOfRange(f64),
    #[error("template band outside Nyquist: {0}")]
    BandOutsideNyquist(String),
    #[error("need ≥ 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("unsorted input: {0}")]
    UnsortedInput(String),
    #[error("slides not independent: step {step_s} s ≤ 2 × window {window_s} s")]
    SlidesNotIndependent { step_s: f64, window_s: f64 },
    #[error("bad magic")]
    BadMagic,
    #[error("version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("empty series")]
    EmptySeries,
    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
