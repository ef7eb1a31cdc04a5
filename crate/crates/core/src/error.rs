use std::path::PathBuf;

/// Errors produced anywhere in the inference and benchmarking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver diverged at step {step} (residual norm {residual})")]
    Divergence { step: usize, residual: f64 },

    #[error("reference solve did not converge after {iterations} steps (residual norm {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("frame {t}: {source}")]
    Frame {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("budget schedule has {got} entries but the stream has {expected} frames")]
    ScheduleLength { expected: usize, got: usize },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn at_frame(self, t: usize) -> Self {
        Error::Frame {
            t,
            source: Box::new(self),
        }
    }
}
