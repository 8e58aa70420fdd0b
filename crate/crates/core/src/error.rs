use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alignment degenerate: {0}")]
    AlignmentDegenerate(String),

    #[error("incomplete correspondence: replaceable vertex {0} has no anchor")]
    IncompleteCorrespondence(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("invalid skeleton topology: {0}")]
    InvalidTopology(String),

    #[error("skin binding error: {0}")]
    Binding(String),

    #[error("overlap map error: {0}")]
    OverlapMap(String),

    #[error("training failed: {0}")]
    TrainingFailure(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("skeleton mismatch: {0}")]
    Skeleton(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("clip library failed validation:\n{0}")]
    Lint(String),

    #[error("no feasible path at step {step}: {reason}")]
    Infeasible { step: usize, reason: String },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Short machine-readable tag for this error's variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AlignmentDegenerate(_) => "alignment-degenerate",
            Error::IncompleteCorrespondence(_) => "incomplete-correspondence",
            Error::Dimension(_) => "dimension",
            Error::Topology(_) => "topology",
            Error::InvalidTopology(_) => "invalid-topology",
            Error::Binding(_) => "binding",
            Error::OverlapMap(_) => "overlap-map",
            Error::TrainingFailure(_) => "training-failure",
            Error::Format(_) => "format",
            Error::Skeleton(_) => "skeleton",
            Error::Graph(_) => "graph",
            Error::Lint(_) => "lint",
            Error::Infeasible { .. } => "infeasible",
            Error::Composition(_) => "composition",
            Error::Model(_) => "model",
            Error::Invalid(_) => "invalid",
            Error::Schema { .. } => "schema",
            Error::Io { .. } => "io",
            Error::Image(_) => "image",
        }
    }

    /// True for failures that happen while computing on valid inputs, as
    /// opposed to inputs that were malformed or inconsistent.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. } | Error::TrainingFailure(_) | Error::Composition(_)
        )
    }
}
