use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate distance: instances {i} and {j} coincide (d = 0)")]
    DegenerateDistance { i: usize, j: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("degenerate grouping: {0}")]
    DegenerateGrouping(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("undefined index: {0}")]
    UndefinedIndex(String),

    #[error("grid search failed: every tuple was degenerate ({} evaluated)", diagnostics.len())]
    SearchFailure { diagnostics: Vec<String> },

    #[error("dataset `{name}` not found at {path}\n{instructions}")]
    MissingDataset {
        name: String,
        path: String,
        instructions: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
