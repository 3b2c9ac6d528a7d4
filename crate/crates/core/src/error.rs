use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid scene: {0}")]
    InvalidScene(#[from] crate::types::Violation),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration} (loss {loss})")]
    TrainingDiverged { iteration: usize, loss: f64 },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        CoreError::ShapeMismatch(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        CoreError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error (possibly wrapped in a stage) is a training divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            CoreError::TrainingDiverged { .. } => true,
            CoreError::Stage { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
