use super::overlap::OverlapMap;
use super::rig::Pose;
use crate::{Error, Result, Vec3};

/// Sum of squared per-vertex distances between two meshes with the same
/// topology.
pub fn vertex_loss(current: &[Vec3], target: &[Vec3]) -> Result<f64> {
    if current.len() != target.len() {
        return Err(Error::Topology(format!(
            "{} current vertices vs {} target vertices",
            current.len(),
            target.len()
        )));
    }
    Ok(current
        .iter()
        .zip(target)
        .map(|(c, t)| (c - t).norm_squared())
        .sum())
}

/// Sum of squared distances between each overlapping joint and its vertex,
/// both taken in the current (posed, deformed) state.
pub fn overlap_loss(pose: &Pose, deformed: &[Vec3], map: &OverlapMap) -> Result<f64> {
    let mut sum = 0.0;
    for &(j, v) in map.pairs() {
        let s = pose
            .get(j)
            .ok_or_else(|| Error::OverlapMap(format!("joint {j} missing from pose")))?;
        let p = deformed
            .get(v)
            .ok_or_else(|| Error::OverlapMap(format!("vertex {v} missing from mesh")))?;
        sum += (s.translation.vector - p).norm_squared();
    }
    Ok(sum)
}
