use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] permanental::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("output error: {0}")]
    Output(String),
    #[error("{0} acceptance criteria failed")]
    Failed(usize),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// `2` for configuration problems, `1` for numerical aborts and failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_numerical() => 1,
            CliError::Output(_) | CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}
