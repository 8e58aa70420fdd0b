//! JSON documents for rigs and calibration results.

use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::calibrate::{CalibrationResult, TraceEntry};
use super::grad::LossParts;
use super::overlap::{OverlapMap, DEFAULT_BIND_TOLERANCE};
use super::rig::{forward_kinematics, Joint, SkeletonRig};
use super::skin::SkinBinding;
use crate::{schema, Error, Result, Vec3};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRecord {
    pub name: String,
    pub parent: Option<String>,
    pub translation: [f64; 3],
    /// `[w, x, y, z]`.
    pub rotation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRecord {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapRecord {
    pub joint: String,
    pub vertex: usize,
}

/// Rig, skin binding and overlap map in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigDocument {
    pub schema: String,
    pub joints: Vec<JointRecord>,
    /// Per vertex: sparse `[joint_index, weight]` pairs.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// Bind-time absolute joint transforms; forward kinematics of `joints`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest: Option<Vec<TransformRecord>>,
    #[serde(default)]
    pub overlap: Vec<OverlapRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind_tolerance: Option<f64>,
}

fn quat_from(r: [f64; 4], what: &str) -> Result<UnitQuaternion<f64>> {
    let q = Quaternion::new(r[0], r[1], r[2], r[3]);
    if (q.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Invalid(format!(
            "{what}: quaternion norm {} is not 1 within {UNIT_TOL:e}",
            q.norm()
        )));
    }
    // Keep already-normalized input bit-exact so documents round-trip.
    if (q.norm() - 1.0).abs() <= 4.0 * f64::EPSILON {
        Ok(UnitQuaternion::new_unchecked(q))
    } else {
        Ok(UnitQuaternion::new_normalize(q))
    }
}

fn quat_to(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub(crate) fn joint_records(rig: &SkeletonRig) -> Vec<JointRecord> {
    rig.joints()
        .iter()
        .map(|j| JointRecord {
            name: j.name.clone(),
            parent: j.parent.map(|p| rig.joints()[p].name.clone()),
            translation: j.translation.into(),
            rotation: quat_to(&j.rotation),
        })
        .collect()
}

pub(crate) fn rig_from_records(records: &[JointRecord]) -> Result<SkeletonRig> {
    let index = |name: &str| {
        records
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::InvalidTopology(format!("unknown parent joint `{name}`")))
    };
    for (i, r) in records.iter().enumerate() {
        if records[..i].iter().any(|o| o.name == r.name) {
            return Err(Error::InvalidTopology(format!("duplicate joint name `{}`", r.name)));
        }
    }
    let joints = records
        .iter()
        .map(|r| {
            Ok(Joint {
                name: r.name.clone(),
                parent: r.parent.as_deref().map(index).transpose()?,
                translation: Vec3::from(r.translation),
                rotation: quat_from(r.rotation, &r.name)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SkeletonRig::new(joints)
}

impl RigDocument {
    pub fn from_parts(rig: &SkeletonRig, binding: &SkinBinding, overlap: &OverlapMap) -> Self {
        Self {
            schema: schema::RIG.into(),
            joints: joint_records(rig),
            weights: binding.weights().to_vec(),
            rest: Some(
                binding
                    .rest()
                    .iter()
                    .map(|r| TransformRecord {
                        translation: r.translation.vector.into(),
                        rotation: quat_to(&r.rotation),
                    })
                    .collect(),
            ),
            overlap: overlap
                .pairs()
                .iter()
                .map(|&(j, v)| OverlapRecord {
                    joint: rig.joints()[j].name.clone(),
                    vertex: v,
                })
                .collect(),
            bind_tolerance: None,
        }
    }

    /// Builds and validates the rig, binding and overlap map for a mesh with
    /// `neutral` vertices. Overlapping joints must sit on their vertices in
    /// the neutral rig.
    pub fn into_parts(&self, neutral: &[Vec3]) -> Result<(SkeletonRig, SkinBinding, OverlapMap)> {
        let rig = rig_from_records(&self.joints)?;
        let rest = match &self.rest {
            Some(records) => {
                if records.len() != rig.len() {
                    return Err(Error::Binding(format!(
                        "{} rest transforms for {} joints",
                        records.len(),
                        rig.len()
                    )));
                }
                records
                    .iter()
                    .enumerate()
                    .map(|(j, r)| {
                        Ok(Isometry3::from_parts(
                            Translation3::from(Vec3::from(r.translation)),
                            quat_from(r.rotation, &format!("rest transform {j}"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => forward_kinematics(&rig),
        };
        if self.weights.len() != neutral.len() {
            return Err(Error::Binding(format!(
                "{} weight entries for {} vertices",
                self.weights.len(),
                neutral.len()
            )));
        }
        let binding = SkinBinding::new(self.weights.clone(), rest)?;
        let pairs = self
            .overlap
            .iter()
            .map(|o| {
                rig.find(&o.joint)
                    .map(|j| (j, o.vertex))
                    .ok_or_else(|| Error::OverlapMap(format!("unknown joint `{}`", o.joint)))
            })
            .collect::<Result<Vec<_>>>()?;
        let overlap = OverlapMap::new(&rig, neutral.len(), pairs)?;
        overlap.check_bind(&rig, neutral, self.bind_tolerance.unwrap_or(DEFAULT_BIND_TOLERANCE))?;
        Ok((rig, binding, overlap))
    }

    pub fn read(path: &Path) -> Result<Self> {
        schema::read_json(path, schema::RIG)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub vertex: f64,
    pub overlap: f64,
    pub total: f64,
}

impl From<LossParts> for LossRecord {
    fn from(p: LossParts) -> Self {
        Self {
            vertex: p.vertex,
            overlap: p.overlap,
            total: p.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub vertex: usize,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLosses {
    pub initial: LossRecord,
    pub skeleton_fit: LossRecord,
    #[serde(rename = "final")]
    pub final_: LossRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDocument {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub joints: Vec<JointRecord>,
    /// Non-zero residual offsets only.
    pub residual: Vec<ResidualRecord>,
    pub losses: CalibrationLosses,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// Residual offsets shorter than this are omitted from the sparse list.
pub const RESIDUAL_EPSILON: f64 = 1e-12;

impl CalibrationDocument {
    pub fn new(result: &CalibrationResult) -> Self {
        Self {
            schema: schema::CALIBRATION.into(),
            provenance: None,
            joints: joint_records(&result.rig),
            residual: result
                .residual
                .iter()
                .enumerate()
                .filter(|(_, r)| r.norm() > RESIDUAL_EPSILON)
                .map(|(vertex, r)| ResidualRecord {
                    vertex,
                    offset: (*r).into(),
                })
                .collect(),
            losses: CalibrationLosses {
                initial: result.initial.into(),
                skeleton_fit: result.skeleton_fit.into(),
                final_: result.final_losses.into(),
            },
            iterations: result.iterations,
            converged: result.converged,
            trace: result.trace.clone(),
        }
    }

    pub fn rig(&self) -> Result<SkeletonRig> {
        rig_from_records(&self.joints)
    }

    /// Dense residual for a mesh with `vertex_count` vertices.
    pub fn residual_dense(&self, vertex_count: usize) -> Result<Vec<Vec3>> {
        let mut out = vec![Vec3::zeros(); vertex_count];
        for r in &self.residual {
            *out.get_mut(r.vertex)
                .ok_or_else(|| Error::Dimension(format!("residual vertex {} out of range", r.vertex)))? =
                Vec3::from(r.offset);
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        schema::read_json(path, schema::CALIBRATION)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::synth::face_rig;

    #[test]
    fn rig_document_round_trips() {
        let s = face_rig(1);
        let doc = RigDocument::from_parts(&s.rig, &s.binding, &s.overlap);
        let text = serde_json::to_string(&doc).unwrap();
        let back: RigDocument = serde_json::from_str(&text).unwrap();
        let (rig, binding, overlap) = back.into_parts(&s.neutral.vertices).unwrap();
        assert_eq!(rig, s.rig);
        assert_eq!(binding.weights(), s.binding.weights());
        assert_eq!(overlap, s.overlap);
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let s = face_rig(1);
        let mut doc = RigDocument::from_parts(&s.rig, &s.binding, &s.overlap);
        doc.joints[3].rotation = [1.0, 0.1, 0.0, 0.0];
        assert!(doc.into_parts(&s.neutral.vertices).is_err());
    }

    #[test]
    fn unknown_parent_and_cycles_are_rejected() {
        let s = face_rig(1);
        let mut doc = RigDocument::from_parts(&s.rig, &s.binding, &s.overlap);
        doc.joints[1].parent = Some("nope".into());
        assert!(doc.into_parts(&s.neutral.vertices).is_err());
        let mut doc = RigDocument::from_parts(&s.rig, &s.binding, &s.overlap);
        doc.joints[0].parent = Some("head".into());
        assert!(matches!(doc.into_parts(&s.neutral.vertices), Err(Error::InvalidTopology(_))));
    }
}
