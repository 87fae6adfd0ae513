use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<Error> },

    #[error("cannot serialize config: {0}")]
    Serialize(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Solver(#[from] fadegame_core::Error),

    #[error("thread pool: {0}")]
    Pool(String),
}

impl Error {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        Error::InFile {
            path: path.to_path_buf(),
            inner: Box::new(self),
        }
    }
}
