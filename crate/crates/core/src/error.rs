use std::io;

use thiserror::Error;

use crate::metrics::MetricKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bit index {index} out of range for width {width}")]
    OutOfRange { index: usize, width: usize },

    #[error("tag width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("sampling budget of {max_attempts} draws exceeded for metric {metric} at radius {radius}")]
    SamplingBudgetExceeded {
        metric: MetricKind,
        radius: f64,
        max_attempts: u64,
    },

    #[error("malformed table file: field `{field}`: {message}")]
    Format { field: &'static str, message: String },

    #[error("unsupported table format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(field: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            field,
            message: message.into(),
        }
    }
}
