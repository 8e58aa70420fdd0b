//! Facial control-rig regression from audio features.
//!
//! A per-frame perceptron reads a `±w` frame window of features and emits
//! every control coefficient at once; a whole track is decoded in one
//! batched pass with no feedback from earlier outputs. Interjection
//! templates are then crossfaded in at timestamped trigger tokens.

mod interject;
mod loss;
mod model;
pub mod synth;
mod track;

pub use interject::{
    apply_interjections, read_events, InterjectionEvent, InterjectionTemplate, SkippedEvent, TemplateSet,
};
pub use loss::{rec_loss, vel_loss};
pub use model::{
    drive_face, evaluate, train_face_model, FaceEvaluation, FaceModelDocument, FaceRegressor, FaceTrainConfig,
    FaceTrainingMetadata,
};
pub use track::{AudioFeatureTrack, Body, RigCoefficientTrack};
