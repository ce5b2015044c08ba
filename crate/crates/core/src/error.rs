use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown label {value:?}")]
    UnknownLabel { line: usize, value: String },

    #[error("unknown label {0:?}")]
    BadLabel(String),

    #[error("{0}")]
    Contract(String),

    #[error("empty training input")]
    EmptyInput,

    #[error("class {0} has zero instances")]
    MissingClass(usize),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("feature schema mismatch: model uses {found:?}, this build extracts {expected:?}")]
    SchemaMismatch { expected: String, found: String },

    #[error("unsupported model version {0:?}")]
    UnsupportedModelVersion(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("cannot make {k} folds from {units} documents")]
    TooFewDocuments { k: usize, units: usize },

    #[error("grid point {params}: {source}")]
    GridPoint {
        params: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input or usage rather than by a
    /// computation (the CLI maps these to exit code 2).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::UnknownLabel { .. }
            | Error::BadLabel(_)
            | Error::InvalidHyperparams(_)
            | Error::SchemaMismatch { .. }
            | Error::UnsupportedModelVersion(_)
            | Error::ModelFormat(_)
            | Error::TooFewDocuments { .. }
            | Error::Io { .. }
            | Error::Json(_) => true,
            Error::GridPoint { source, .. } => source.is_input_error(),
            Error::Contract(_) | Error::EmptyInput | Error::MissingClass(_) => false,
        }
    }
}
