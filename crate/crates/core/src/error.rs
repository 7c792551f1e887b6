use std::path::{Path, PathBuf};

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("degenerate vector at sample {index}: {reason}")]
    DegenerateVector { index: usize, reason: &'static str },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("graph has no positive edge weight")]
    EmptyGraph,

    #[error("layer '{name}': {source}")]
    Layer {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Attaches a layer name, keeping the innermost error intact.
    pub fn in_layer(self, name: &str) -> Self {
        Error::Layer {
            name: name.to_string(),
            source: Box::new(self),
        }
    }

    /// The error with any layer context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Layer { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 2 for usage or parameter errors, 3 for data and format errors, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Parameter(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
