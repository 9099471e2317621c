use thiserror::Error;

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Lab(#[from] leibenson::LabError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config { .. })
    }
}
