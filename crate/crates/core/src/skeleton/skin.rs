use nalgebra::Isometry3;

use super::rig::Pose;
use crate::{par, Error, Result, Vec3};

/// Tolerance on per-vertex weight sums.
const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Sparse per-vertex skinning weights plus the bind-time joint transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinBinding {
    weights: Vec<Vec<(usize, f64)>>,
    rest: Pose,
}

impl SkinBinding {
    pub fn new(weights: Vec<Vec<(usize, f64)>>, rest: Pose) -> Result<Self> {
        let joints = rest.len();
        for (v, list) in weights.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Binding(format!("vertex {v} has no weights")));
            }
            let mut sum = 0.0;
            for &(j, w) in list {
                if j >= joints {
                    return Err(Error::Binding(format!(
                        "vertex {v} references joint {j}, rig has {joints}"
                    )));
                }
                if !(w >= 0.0) {
                    return Err(Error::Binding(format!("vertex {v} has weight {w} < 0")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::Binding(format!("vertex {v} weights sum to {sum}")));
            }
        }
        Ok(Self { weights, rest })
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn rest(&self) -> &Pose {
        &self.rest
    }

    pub fn vertex_count(&self) -> usize {
        self.weights.len()
    }

    /// `pose[j] * rest[j]^-1` for every joint.
    pub fn skinning_transforms(&self, pose: &Pose) -> Result<Vec<Isometry3<f64>>> {
        if pose.len() != self.rest.len() {
            return Err(Error::Binding(format!(
                "pose has {} joints, binding expects {}",
                pose.len(),
                self.rest.len()
            )));
        }
        Ok(pose
            .iter()
            .zip(&self.rest)
            .map(|(p, r)| p * r.inverse())
            .collect())
    }
}

/// Linear blend skinning: `v' = sum_j w_j * (pose_j * rest_j^-1)(v)`.
pub fn lbs_deform(vertices: &[Vec3], binding: &SkinBinding, pose: &Pose) -> Result<Vec<Vec3>> {
    if vertices.len() != binding.vertex_count() {
        return Err(Error::Binding(format!(
            "{} vertices but {} weight entries",
            vertices.len(),
            binding.vertex_count()
        )));
    }
    let skin = binding.skinning_transforms(pose)?;
    Ok(par::map_range(vertices.len(), |n| {
        let p = nalgebra::Point3::from(vertices[n]);
        binding.weights[n]
            .iter()
            .map(|&(j, w)| w * (skin[j] * p).coords)
            .sum()
    }))
}
