use nalgebra::{Matrix3, Point3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::grad::{total_loss, total_loss_gradient, JointGradient, LossParts};
use super::overlap::OverlapMap;
use super::rig::{forward_kinematics, SkeletonRig};
use super::skin::SkinBinding;
use crate::mesh::Mesh;
use crate::nn::Adam;
use crate::{Error, Result, Vec3};

/// Optimizer settings for [`calibrate_skeleton`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Relative loss decrease below which an iteration counts as stalled.
    pub tolerance: f64,
    /// Consecutive stalled iterations before the fit is declared converged.
    pub patience: usize,
    /// Total loss at or below which the fit stops immediately.
    pub loss_floor: f64,
    pub optimize_translations: bool,
    pub optimize_rotations: bool,
    /// Halve the step until the loss does not increase.
    pub step_halving: bool,
    /// Per-joint cap on each step's translation length (model units) and
    /// rotation angle (radians).
    pub max_step: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_iterations: 2000,
            tolerance: 1e-6,
            patience: 10,
            loss_floor: 1e-14,
            optimize_translations: true,
            optimize_rotations: false,
            step_halving: true,
            max_step: Some(0.02),
        }
    }
}

pub struct CalibrationInput<'a> {
    pub rig: &'a SkeletonRig,
    pub binding: &'a SkinBinding,
    pub neutral: &'a Mesh,
    pub target: &'a Mesh,
    pub overlap: &'a OverlapMap,
    /// Vertices allowed to carry a residual offset; `None` means all.
    pub residual_mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1: skeleton fit on the neutral mesh; 2: refit on the blended neutral.
    pub stage: u8,
    pub iteration: usize,
    pub vertex: f64,
    pub overlap: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub rig: SkeletonRig,
    /// Rest-space offset per vertex, applied before skinning.
    pub residual: Vec<Vec3>,
    pub initial: LossParts,
    /// Losses after the leaf fit alone, before any residual.
    pub skeleton_fit: LossParts,
    pub final_losses: LossParts,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl CalibrationResult {
    /// Neutral vertices with the residual blendshape applied.
    pub fn blended_neutral(&self, neutral: &[Vec3]) -> Vec<Vec3> {
        neutral.iter().zip(&self.residual).map(|(v, r)| v + r).collect()
    }
}

/// Two-step calibration.
///
/// 1. Fit leaf-joint locals on the neutral mesh by minimizing `L_v + L_s`.
/// 2. Pull the remaining per-vertex mismatch back through the skinning
///    transforms into a rest-space residual blendshape, apply it to the
///    neutral, and refit the leaves from where step 1 stopped.
///
/// Non-leaf joints are never modified. Hitting `max_iterations` is reported
/// through `converged`, not as an error.
pub fn calibrate_skeleton(
    input: &CalibrationInput<'_>,
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    let neutral = &input.neutral.vertices;
    let target = &input.target.vertices;
    if neutral.len() != target.len() || input.neutral.faces != input.target.faces {
        return Err(Error::Topology(
            "neutral and target meshes must share topology".into(),
        ));
    }
    if input.binding.vertex_count() != neutral.len() {
        return Err(Error::Binding(format!(
            "binding covers {} vertices, mesh has {}",
            input.binding.vertex_count(),
            neutral.len()
        )));
    }
    if let Some(mask) = input.residual_mask {
        if mask.len() != neutral.len() {
            return Err(Error::Dimension(format!(
                "residual mask has {} entries for {} vertices",
                mask.len(),
                neutral.len()
            )));
        }
    }
    if !(config.optimize_translations || config.optimize_rotations) {
        return Err(Error::Invalid("calibration has no parameters to optimize".into()));
    }

    let initial = total_loss(input.rig, input.binding, neutral, target, input.overlap)?;
    let mut rig = input.rig.clone();
    let mut trace = Vec::new();

    let first = fit_leaves(&mut rig, input.binding, neutral, target, input.overlap, config, 1, &mut trace)?;
    let skeleton_fit = first.loss;
    let mut residual = vec![Vec3::zeros(); neutral.len()];
    let mut iterations = first.iterations;
    let mut converged = first.converged;

    if skeleton_fit.total() > config.loss_floor {
        let pose = forward_kinematics(&rig);
        residual = pullback(input.binding, &pose, neutral, target, input.residual_mask)?;
        let blended: Vec<Vec3> = neutral.iter().zip(&residual).map(|(v, r)| v + r).collect();
        let second = fit_leaves(&mut rig, input.binding, &blended, target, input.overlap, config, 2, &mut trace)?;
        iterations += second.iterations;
        converged = second.converged;
        if second.iterations > 0 {
            let pose = forward_kinematics(&rig);
            let refresh = pullback(input.binding, &pose, &blended, target, input.residual_mask)?;
            for (r, d) in residual.iter_mut().zip(refresh) {
                *r += d;
            }
        }
    }

    let blended: Vec<Vec3> = neutral.iter().zip(&residual).map(|(v, r)| v + r).collect();
    let final_losses = total_loss(&rig, input.binding, &blended, target, input.overlap)?;
    Ok(CalibrationResult {
        rig,
        residual,
        initial,
        skeleton_fit,
        final_losses,
        iterations,
        converged,
        trace,
    })
}

struct FitOutcome {
    loss: LossParts,
    iterations: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn fit_leaves(
    rig: &mut SkeletonRig,
    binding: &SkinBinding,
    base: &[Vec3],
    target: &[Vec3],
    map: &OverlapMap,
    cfg: &CalibrationConfig,
    stage: u8,
    trace: &mut Vec<TraceEntry>,
) -> Result<FitOutcome> {
    let leaves = rig.leaves();
    let per_leaf = 3 * (cfg.optimize_translations as usize + cfg.optimize_rotations as usize);
    let mut adam = Adam::new(leaves.len() * per_leaf, cfg.learning_rate);
    let (mut parts, mut grads) = total_loss_gradient(rig, binding, base, target, map)?;
    let record = |trace: &mut Vec<TraceEntry>, iteration, p: &LossParts| {
        trace.push(TraceEntry {
            stage,
            iteration,
            vertex: p.vertex,
            overlap: p.overlap,
            total: p.total(),
        })
    };
    record(trace, 0, &parts);

    let mut scale = 1.0;
    let mut fresh = true;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        if !parts.total().is_finite() {
            return Err(Error::TrainingFailure(format!(
                "calibration loss became {} at iteration {iterations}",
                parts.total()
            )));
        }
        if parts.total() <= cfg.loss_floor {
            converged = true;
            break;
        }
        let flat = flatten(&grads, &leaves, cfg);
        if flat.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let dir = adam.direction(&flat);
        let accepted = loop {
            let trial = apply_step(rig, &leaves, &dir, scale, cfg);
            let (tparts, tgrads) = total_loss_gradient(&trial, binding, base, target, map)?;
            if !cfg.step_halving || tparts.total() <= parts.total() {
                break Some((trial, tparts, tgrads));
            }
            scale *= 0.5;
            if scale < 1e-12 {
                break None;
            }
        };
        let Some((trial, tparts, tgrads)) = accepted else {
            // Stale momentum can point uphill. Restart the moments once
            // before concluding there is no descent left.
            if fresh {
                converged = true;
                break;
            }
            adam = Adam::new(leaves.len() * per_leaf, cfg.learning_rate);
            fresh = true;
            scale = 1.0;
            continue;
        };
        fresh = false;
        scale = (scale * 2.0).min(1.0);
        iterations += 1;
        let rel = (parts.total() - tparts.total()) / parts.total();
        *rig = trial;
        parts = tparts;
        grads = tgrads;
        record(trace, iterations, &parts);
        if rel < cfg.tolerance {
            stalled += 1;
            if stalled >= cfg.patience {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    if parts.total() <= cfg.loss_floor {
        converged = true;
    }
    Ok(FitOutcome {
        loss: parts,
        iterations,
        converged,
    })
}

fn flatten(grads: &[JointGradient], leaves: &[usize], cfg: &CalibrationConfig) -> Vec<f64> {
    let mut out = Vec::new();
    for &j in leaves {
        if cfg.optimize_translations {
            out.extend(grads[j].translation.iter());
        }
        if cfg.optimize_rotations {
            out.extend(grads[j].rotation.iter());
        }
    }
    out
}

fn clamp(v: Vec3, max: Option<f64>) -> Vec3 {
    match max {
        Some(m) if v.norm() > m => v * (m / v.norm()),
        _ => v,
    }
}

fn apply_step(
    rig: &SkeletonRig,
    leaves: &[usize],
    dir: &[f64],
    scale: f64,
    cfg: &CalibrationConfig,
) -> SkeletonRig {
    let mut out = rig.clone();
    let mut k = 0;
    for &j in leaves {
        let joint = &rig.joints()[j];
        let mut t = joint.translation;
        let mut q = joint.rotation;
        if cfg.optimize_translations {
            t += clamp(Vec3::new(dir[k], dir[k + 1], dir[k + 2]) * scale, cfg.max_step);
            k += 3;
        }
        if cfg.optimize_rotations {
            let w = clamp(Vec3::new(dir[k], dir[k + 1], dir[k + 2]) * scale, cfg.max_step);
            q = UnitQuaternion::new_normalize(*(UnitQuaternion::from_scaled_axis(w) * q).quaternion());
            k += 3;
        }
        out.set_local(j, t, q);
    }
    out
}

/// Rest-space offsets that make `lbs(base + r) == target` on masked
/// vertices. LBS is affine in the rest position, so each vertex's offset is
/// the inverse of its blended skinning matrix applied to the mismatch.
fn pullback(
    binding: &SkinBinding,
    pose: &super::rig::Pose,
    base: &[Vec3],
    target: &[Vec3],
    mask: Option<&[bool]>,
) -> Result<Vec<Vec3>> {
    let skin = binding.skinning_transforms(pose)?;
    Ok(crate::par::map_range(base.len(), |n| {
        if mask.is_some_and(|m| !m[n]) {
            return Vec3::zeros();
        }
        let mut blend = Matrix3::zeros();
        let mut cur = Vec3::zeros();
        for &(j, w) in &binding.weights()[n] {
            blend += w * skin[j].rotation.to_rotation_matrix().into_inner();
            cur += w * (skin[j] * Point3::from(base[n])).coords;
        }
        match blend.try_inverse() {
            Some(inv) => inv * (target[n] - cur),
            None => Vec3::zeros(),
        }
    }))
}
