use std::path::PathBuf;

/// Errors raised anywhere in the lexicon pipeline.
#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("missing feature file for segment `{segment_id}` ({path})")]
    MissingFeatures { segment_id: String, path: PathBuf },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("non-finite value in segment `{segment_id}` at frame {frame}")]
    NonFinite { segment_id: String, frame: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "distance table needs {needed} bytes but the budget is {budget} bytes; \
         build the graph with threshold streaming instead"
    )]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LexiconError>;

impl LexiconError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            LexiconError::Io { .. } => "io",
            LexiconError::Parse { .. } => "parse",
            LexiconError::Validation(_) => "validation",
            LexiconError::Argument(_) => "argument",
            LexiconError::MissingFeatures { .. } => "missing-features",
            LexiconError::DimensionMismatch { .. } => "dimension-mismatch",
            LexiconError::NonFinite { .. } => "non-finite",
            LexiconError::Degenerate(_) => "degenerate",
            LexiconError::BudgetExceeded { .. } => "budget-exceeded",
            LexiconError::InvalidSystem(_) => "invalid-system",
            LexiconError::Json(_) => "json",
        }
    }

    /// Caller supplied a bad option rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, LexiconError::Argument(_) | LexiconError::InvalidSystem(_))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LexiconError::Io {
            path: path.into(),
            source,
        }
    }
}
