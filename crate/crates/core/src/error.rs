use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus at {} contains no usable documents", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("simulation diverged: non-finite state in neuron {neuron} at t = {time_ms} ms")]
    Diverged { neuron: usize, time_ms: f64 },

    #[error("encoder for subset {subset} failed: {source}")]
    Encoder {
        subset: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("classifier needs at least two classes, got {0}")]
    SingleClass(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::MissingPath(_)
            | Error::EmptyCorpus(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch(_)
            | Error::Format(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Encoder { source, .. } => source.is_input_error(),
            Error::Diverged { .. } | Error::SingleClass(_) => false,
        }
    }
}
