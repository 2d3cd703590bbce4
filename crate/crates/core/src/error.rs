use crate::engine::EngineError;
use crate::harness::HarnessError;
use crate::model::ModelError;
use crate::skeleton::SkeletonError;
use crate::stamp::StampError;

/// Any failure of a command-line run.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    GradCheck(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn engine_kind(e: &EngineError) -> &'static str {
    match e {
        EngineError::Shape(_) => "shape",
        EngineError::Argument(_) => "argument",
        EngineError::State(_) => "state",
        EngineError::Training { .. } => "training",
        EngineError::Format(_) => "checkpoint",
        EngineError::Io(_) => "io",
    }
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::GradCheck(_) => "gradcheck",
            Error::Harness(h) => match h {
                HarnessError::Argument(_) => "argument",
                HarnessError::Dataset(_) => "dataset",
                HarnessError::File { .. } | HarnessError::Io(_) => "io",
                HarnessError::Model(m) => model_kind(m),
                HarnessError::Stamp(_) => "stamp",
                HarnessError::Skeleton(_) => "parse",
            },
            Error::Model(m) => model_kind(m),
            Error::Engine(e) => engine_kind(e),
            Error::Stamp(_) => "stamp",
            Error::Skeleton(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// `error: <kind>: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error: {}: {}", self.kind(), msg.trim())
    }
}

fn model_kind(m: &ModelError) -> &'static str {
    match m {
        ModelError::Config(_) => "config",
        ModelError::Shape(_) => "shape",
        ModelError::Argument(_) => "argument",
        ModelError::MissingModality(_) => "modality",
        ModelError::NonFiniteLoss { .. } => "training",
        ModelError::Engine(e) => engine_kind(e),
        ModelError::Graph(_) => "topology",
        ModelError::Stamp(_) => "stamp",
        ModelError::Skeleton(_) => "parse",
    }
}
