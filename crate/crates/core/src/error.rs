use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The caller asked for something that does not make sense for the given
    /// data (unknown attribute, mismatched scenario, foreign segment, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A ratio measure was requested over a scope with no observations.
    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    /// P(E) == 1: every key value in scope is the same label.
    #[error("degenerate chance agreement (P(E) = 1){}", .attribute.as_ref().map(|a| format!(" for attribute {a}")).unwrap_or_default())]
    DegenerateChance { attribute: Option<String> },

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("collinear predictors: {}", .columns.join(", "))]
    Collinear { columns: Vec<String> },

    #[error("insufficient data: {rows} rows for {predictors} predictors (need at least {needed})")]
    InsufficientData {
        rows: usize,
        predictors: usize,
        needed: usize,
    },

    #[error("missing satisfaction rating for: {}", .units.join(", "))]
    MissingSatisfaction { units: Vec<String> },

    #[error("every predictor was pruned at p < {threshold}; no model remains")]
    EmptyModel { threshold: f64 },

    #[error("degenerate normalization pool: {0}")]
    DegeneratePool(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by how the tool was invoked rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::MissingSatisfaction { .. })
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}
