use std::collections::BTreeSet;

use super::rig::{forward_kinematics, SkeletonRig};
use crate::{Error, Result, Vec3};

pub const DEFAULT_BIND_TOLERANCE: f64 = 1e-4;

/// Leaf joints that coincide with mesh vertices, and which vertex each one
/// sits on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverlapMap {
    pairs: Vec<(usize, usize)>,
}

impl OverlapMap {
    /// `pairs` holds `(joint, vertex)`. Joints must be distinct leaves and
    /// vertices must be distinct and in range.
    pub fn new(rig: &SkeletonRig, vertex_count: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut joints = BTreeSet::new();
        let mut verts = BTreeSet::new();
        for &(j, v) in &pairs {
            if j >= rig.len() {
                return Err(Error::OverlapMap(format!("joint {j} not in rig")));
            }
            if !rig.is_leaf(j) {
                return Err(Error::OverlapMap(format!(
                    "joint `{}` is not a leaf",
                    rig.joints()[j].name
                )));
            }
            if v >= vertex_count {
                return Err(Error::OverlapMap(format!("vertex {v} out of range")));
            }
            if !joints.insert(j) {
                return Err(Error::OverlapMap(format!("joint {j} listed twice")));
            }
            if !verts.insert(v) {
                return Err(Error::OverlapMap(format!("vertex {v} mapped twice")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks that each mapped joint sits on its vertex in the neutral rig.
    pub fn check_bind(&self, rig: &SkeletonRig, neutral: &[Vec3], tolerance: f64) -> Result<()> {
        let pose = forward_kinematics(rig);
        for &(j, v) in &self.pairs {
            let d = (pose[j].translation.vector - neutral[v]).norm();
            if d >= tolerance {
                return Err(Error::OverlapMap(format!(
                    "joint `{}` is {d:.3e} from vertex {v} (tolerance {tolerance:.1e})",
                    rig.joints()[j].name
                )));
            }
        }
        Ok(())
    }
}
