use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One joint in one frame: position relative to the root and rotation as a
/// unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointState {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
}

/// A full-body pose: root translation plus every joint's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub root: [f64; 3],
    pub joints: Vec<JointState>,
}

fn quat(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Geodesic angle between two rotations, in `[0, π]`. Antipodal quaternions
/// are the same rotation.
pub fn geodesic_angle(a: [f64; 4], b: [f64; 4]) -> f64 {
    let (qa, qb) = (quat(a), quat(b));
    let dot = qa.coords.dot(&qb.coords).abs().min(1.0);
    2.0 * dot.acos()
}

/// `(T_p, T_r)` between the end pose of one clip and the start pose of the
/// next: summed squared root-relative position offsets and summed squared
/// geodesic joint angles.
pub fn pose_costs(end: &Frame, start: &Frame) -> Result<(f64, f64)> {
    if end.joints.len() != start.joints.len() {
        return Err(Error::Skeleton(format!(
            "poses have {} and {} joints",
            end.joints.len(),
            start.joints.len()
        )));
    }
    let mut tp = 0.0;
    let mut tr = 0.0;
    for (a, b) in end.joints.iter().zip(&start.joints) {
        tp += (0..3).map(|k| (a.position[k] - b.position[k]).powi(2)).sum::<f64>();
        tr += geodesic_angle(a.rotation, b.rotation).powi(2);
    }
    Ok((tp, tr))
}
