//! Motion graphs over captured gesture clips.
//!
//! Clips become nodes; observed continuations become edges weighted by how
//! far the end pose of one clip is from the start pose of the next. A
//! Viterbi pass picks the clip sequence that best matches a stream of audio
//! embeddings, and [`compose_track`] stitches the chosen clips together,
//! inserting transition clips where the pose category changes.

mod clip;
mod compose;
mod embed;
mod graph;
mod pose;
pub mod synth;
mod track;
mod viterbi;

pub use clip::{Category, ClipLibrary, LintIssue, MotionClip, PoseTolerance};
pub use compose::{compose_segments, compose_track, Segment, SegmentPlan};
pub use embed::AudioEmbeddingSequence;
pub use graph::{build_graph, Edge, MotionGraph};
pub use pose::{geodesic_angle, pose_costs, Frame, JointState};
pub use track::{MotionTrack, TrackClip};
pub use viterbi::{brute_force_path, viterbi_path, EmbeddingMetric, StepCost, ViterbiResult, ViterbiStats};
