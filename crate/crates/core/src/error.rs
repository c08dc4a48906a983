use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite {what} in layer {layer}")]
    NonFinite { layer: usize, what: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("bodies {i} and {j} are coincident (separation {separation:e})")]
    Singularity { i: usize, j: usize, separation: f64 },

    #[error("step size underflow at t={t}: h={h:e} (span {span})")]
    StepUnderflow { t: f64, h: f64, span: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Contract(_) | Error::Shape(_) | Error::Json(_) => 2,
            Error::NonFinite { .. }
            | Error::Numeric(_)
            | Error::Singularity { .. }
            | Error::StepUnderflow { .. } => 3,
            Error::Parse { .. } | Error::Io { .. } => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::io("i/o", source)
    }
}
