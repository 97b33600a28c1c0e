use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample rate {fs} Hz cannot represent a {freq} Hz component")]
    Aliasing { fs: f64, freq: f64 },

    #[error("frame {index} has no reference counts")]
    EmptyFrame { index: usize },

    #[error("trace `{0}` has zero variance after detrending")]
    ZeroVariance(&'static str),

    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    SampleRateMismatch(f64, f64),

    #[error("delay {delay_s} s exceeds the link span of {max_s} s")]
    DelayOutOfRange { delay_s: f64, max_s: f64 },

    #[error("malformed trace file: {0}")]
    TraceFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
