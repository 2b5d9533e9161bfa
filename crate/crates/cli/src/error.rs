use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] abraham_core::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// 2 configuration, 3 solver divergence, 4 accuracy, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use abraham_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::InvalidParameter(_) | E::HorizonExceeded { .. }) => 2,
            Self::Core(E::Divergence { .. } | E::Stability { .. }) => 3,
            Self::Core(E::Accuracy { .. }) => 4,
            _ => 1,
        }
    }
}
