//! Character rigging and animation composition toolkit.
//!
//! The crate is split by pipeline stage:
//!
//! - [`mesh`]: triangle meshes, landmark alignment, facial detail transfer,
//!   seam smoothing and nose shape bases.
//! - [`skeleton`]: joint hierarchies, forward kinematics, linear blend
//!   skinning and leaf-joint calibration against a target mesh.
//! - [`color`]: a small perceptron that inverts a renderer's color response,
//!   plus texture correction and relit-image blending.
//! - [`motion`]: motion graphs over captured gesture clips and Viterbi
//!   selection of clip sequences for an audio embedding stream.
//! - [`face`]: windowed facial control-rig regression from audio features
//!   and interjection template splicing.
//!
//! Data-parallel inner loops (per-vertex skinning, per-sample gradients,
//! per-pixel correction, per-node relaxation) go through [`par`], which uses
//! rayon when the `parallel` feature is enabled and plain iterators otherwise.
//! Reductions always run in a fixed order, so results are bit-identical with
//! and without the feature.

pub mod color;
pub mod error;
pub mod face;
pub mod mesh;
pub mod motion;
pub mod nn;
pub mod par;
pub mod schema;
pub mod skeleton;

pub use error::{Error, Result};

/// 3-vector used for positions and displacements throughout the crate.
pub type Vec3 = nalgebra::Vector3<f64>;
