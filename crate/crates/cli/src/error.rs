use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, manifest or input schema.
    #[error("{0}")]
    Validation(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }

    pub fn invalid(err: impl std::fmt::Display) -> Self {
        CliError::Validation(err.to_string())
    }
}
