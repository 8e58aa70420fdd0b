//! Reverse-mode derivative of the calibration loss through skinning and
//! forward kinematics.
//!
//! Forward: `abs_j = abs_parent * local_j`, skinned vertices
//! `v'_n = sum_j w_nj (R_j u_nj + t_j)` with `u_nj = rest_j^-1 v_n`, then
//! `L = L_v + L_s`. The backward sweep first collects `dL/dR_j` and
//! `dL/dt_j` for every absolute transform, then walks the tree leaves-first
//! pushing adjoints into each local translation and rotation.
//!
//! Rotation gradients are with respect to a left-multiplied axis-angle
//! increment, `R_local <- exp([w]x) R_local`, evaluated at `w = 0`.

use nalgebra::{Matrix3, Point3};

use super::loss::{overlap_loss, vertex_loss};
use super::overlap::OverlapMap;
use super::rig::{forward_kinematics, SkeletonRig};
use super::skin::{lbs_deform, SkinBinding};
use crate::{par, Error, Result, Vec3};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub vertex: f64,
    pub overlap: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.vertex + self.overlap
    }
}

/// Gradient with respect to one joint's local parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointGradient {
    pub translation: Vec3,
    pub rotation: Vec3,
}

/// `L_v + L_s` for the rig's current locals, skinning `base` (the rest
/// mesh, possibly with a residual blendshape applied).
pub fn total_loss(
    rig: &SkeletonRig,
    binding: &SkinBinding,
    base: &[Vec3],
    target: &[Vec3],
    map: &OverlapMap,
) -> Result<LossParts> {
    let pose = forward_kinematics(rig);
    let deformed = lbs_deform(base, binding, &pose)?;
    Ok(LossParts {
        vertex: vertex_loss(&deformed, target)?,
        overlap: overlap_loss(&pose, &deformed, map)?,
    })
}

/// Vertices per work unit in the adjoint accumulation.
const ACCUM_CHUNK: usize = 256;

pub fn total_loss_gradient(
    rig: &SkeletonRig,
    binding: &SkinBinding,
    base: &[Vec3],
    target: &[Vec3],
    map: &OverlapMap,
) -> Result<(LossParts, Vec<JointGradient>)> {
    if base.len() != target.len() {
        return Err(Error::Topology(format!(
            "{} base vertices vs {} target vertices",
            base.len(),
            target.len()
        )));
    }
    let joints = rig.len();
    let pose = forward_kinematics(rig);
    let deformed = lbs_deform(base, binding, &pose)?;
    let parts = LossParts {
        vertex: vertex_loss(&deformed, target)?,
        overlap: overlap_loss(&pose, &deformed, map)?,
    };

    // dL/dv' per vertex.
    let mut vert_adj: Vec<Vec3> = deformed
        .iter()
        .zip(target)
        .map(|(c, t)| 2.0 * (c - t))
        .collect();
    let mut grad_t = vec![Vec3::zeros(); joints];
    let mut grad_r = vec![Matrix3::<f64>::zeros(); joints];
    for &(j, v) in map.pairs() {
        let r = pose[j].translation.vector - deformed[v];
        grad_t[j] += 2.0 * r;
        vert_adj[v] -= 2.0 * r;
    }

    let rest_inv: Vec<_> = binding.rest().iter().map(|r| r.inverse()).collect();
    let weights = binding.weights();
    let chunk_starts: Vec<usize> = (0..base.len()).step_by(ACCUM_CHUNK).collect();
    let partials = par::map_slice(&chunk_starts, |&start| {
        let mut gt = vec![Vec3::zeros(); joints];
        let mut gr = vec![Matrix3::<f64>::zeros(); joints];
        for n in start..(start + ACCUM_CHUNK).min(base.len()) {
            let e = vert_adj[n];
            for &(j, w) in &weights[n] {
                let u = (rest_inv[j] * Point3::from(base[n])).coords;
                gt[j] += w * e;
                gr[j] += (w * e) * u.transpose();
            }
        }
        (gt, gr)
    });
    for (gt, gr) in partials {
        for j in 0..joints {
            grad_t[j] += gt[j];
            grad_r[j] += gr[j];
        }
    }

    let mut out = vec![JointGradient::default(); joints];
    for &j in rig.topological_order().iter().rev() {
        let joint = &rig.joints()[j];
        let local_r = joint.rotation.to_rotation_matrix().into_inner();
        let (grad_local_r, grad_tau) = match joint.parent {
            Some(p) => {
                let parent_r = pose[p].rotation.to_rotation_matrix().into_inner();
                let gl = parent_r.transpose() * grad_r[j];
                let gtau = parent_r.transpose() * grad_t[j];
                let gr_j = grad_r[j];
                let gt_j = grad_t[j];
                grad_r[p] += gr_j * local_r.transpose() + gt_j * joint.translation.transpose();
                grad_t[p] += gt_j;
                (gl, gtau)
            }
            None => (grad_r[j], grad_t[j]),
        };
        let h = grad_local_r * local_r.transpose();
        out[j] = JointGradient {
            translation: grad_tau,
            rotation: Vec3::new(h[(2, 1)] - h[(1, 2)], h[(0, 2)] - h[(2, 0)], h[(1, 0)] - h[(0, 1)]),
        };
    }
    Ok((parts, out))
}
