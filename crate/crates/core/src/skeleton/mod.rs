//! Joint hierarchies, linear blend skinning and skeleton calibration.
//!
//! Calibration fits a pre-rigged neutral skeleton to a new target mesh that
//! shares the neutral's vertex topology. Only leaf joints are optimized; a
//! rest-space residual blendshape absorbs whatever the skeleton cannot.

mod calibrate;
mod grad;
mod io;
mod loss;
mod overlap;
mod rig;
mod skin;
pub mod synth;

pub use calibrate::{
    calibrate_skeleton, CalibrationConfig, CalibrationInput, CalibrationResult, TraceEntry,
};
pub use grad::{total_loss, total_loss_gradient, JointGradient, LossParts};
pub use io::{CalibrationDocument, RigDocument};
pub use loss::{overlap_loss, vertex_loss};
pub use overlap::{OverlapMap, DEFAULT_BIND_TOLERANCE};
pub use rig::{forward_kinematics, Joint, Pose, SkeletonRig};
pub use skin::{lbs_deform, SkinBinding};
