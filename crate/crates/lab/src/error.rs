use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Core(#[from] nls_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Exit status for the CLI: 1 when a run itself failed (non-finite
    /// state, blow-up), 2 for anything that stopped it from starting.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(nls_core::Error::NonFiniteState(_) | nls_core::Error::BlowUp { .. }) => 1,
            _ => 2,
        }
    }
}
