use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pose::{geodesic_angle, Frame};
use crate::{schema, Error, Result};

/// Pose category of a clip: one of the canonical poses, or a transition
/// from one canonical pose to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Category {
    Pose(u8),
    Transition { from: u8, to: u8 },
}

impl Category {
    /// Canonical pose a clip of this category starts in.
    pub fn start(self) -> u8 {
        match self {
            Category::Pose(c) => c,
            Category::Transition { from, .. } => from,
        }
    }

    /// Canonical pose a clip of this category ends in.
    pub fn end(self) -> u8 {
        match self {
            Category::Pose(c) => c,
            Category::Transition { to, .. } => to,
        }
    }

    pub fn is_transition(self) -> bool {
        matches!(self, Category::Transition { .. })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Pose(c) => write!(f, "pose {c}"),
            Category::Transition { from, to } => write!(f, "transition {from}->{to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionClip {
    pub id: usize,
    pub category: Category,
    pub frames: Vec<Frame>,
    /// Audio embedding associated with the clip (Â).
    pub embedding: Vec<f64>,
}

impl MotionClip {
    pub fn start_pose(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn end_pose(&self) -> &Frame {
        self.frames.last().expect("clips have frames")
    }

    pub fn duration(&self, fps: f64) -> f64 {
        self.frames.len() as f64 / fps
    }
}

/// How close a clip's boundary frames must be to the canonical pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseTolerance {
    /// Largest per-joint geodesic angle, radians.
    pub angle: f64,
    /// Largest root offset, model units.
    pub root: f64,
}

impl Default for PoseTolerance {
    fn default() -> Self {
        Self { angle: 0.02, root: 0.01 }
    }
}

impl PoseTolerance {
    /// Worst joint angle and root offset between two frames, if within
    /// tolerance; the violation otherwise.
    fn check(&self, a: &Frame, b: &Frame) -> std::result::Result<(), String> {
        let root = (0..3).map(|k| (a.root[k] - b.root[k]).powi(2)).sum::<f64>().sqrt();
        if root > self.root {
            return Err(format!("root offset {root:.4} exceeds {}", self.root));
        }
        for (j, (x, y)) in a.joints.iter().zip(&b.joints).enumerate() {
            let angle = geodesic_angle(x.rotation, y.rotation);
            if angle > self.angle {
                return Err(format!("joint {j} off by {angle:.4} rad (limit {})", self.angle));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalPose {
    pub category: u8,
    pub pose: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintIssue {
    pub clip: Option<usize>,
    pub message: String,
}

impl fmt::Display for LintIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.clip {
            Some(id) => write!(f, "clip {id}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// A clip library file: skeleton joint names, canonical poses, clips and
/// observed continuation pairs (by clip id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipLibrary {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub joints: Vec<String>,
    pub fps: f64,
    pub embedding_dim: usize,
    pub canonical_poses: Vec<CanonicalPose>,
    pub clips: Vec<MotionClip>,
    pub adjacency: Vec<(usize, usize)>,
}

impl ClipLibrary {
    pub fn clip(&self, id: usize) -> Option<&MotionClip> {
        self.clips.iter().find(|c| c.id == id)
    }

    /// Structural and pose checks. Returns every problem found rather than
    /// stopping at the first.
    pub fn lint(&self, tol: &PoseTolerance) -> Vec<LintIssue> {
        let mut issues = Vec::new();
        let mut push = |clip, message: String| issues.push(LintIssue { clip, message });
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            push(None, format!("frame rate {} must be positive", self.fps));
        }
        let mut canon = BTreeMap::new();
        for c in &self.canonical_poses {
            if c.pose.joints.len() != self.joints.len() {
                push(None, format!("canonical pose {} has {} joints", c.category, c.pose.joints.len()));
            }
            if canon.insert(c.category, &c.pose).is_some() {
                push(None, format!("canonical pose {} defined twice", c.category));
            }
        }
        let mut ids = BTreeSet::new();
        for clip in &self.clips {
            let id = Some(clip.id);
            if !ids.insert(clip.id) {
                push(id, "duplicate clip id".into());
            }
            if clip.frames.is_empty() {
                push(id, "clip has no frames".into());
                continue;
            }
            if clip.embedding.len() != self.embedding_dim {
                push(
                    id,
                    format!("embedding has {} values, library dimension is {}", clip.embedding.len(), self.embedding_dim),
                );
            }
            if clip.embedding.iter().any(|x| !x.is_finite()) {
                push(id, "embedding has non-finite values".into());
            }
            if let Some((t, f)) = clip.frames.iter().enumerate().find(|(_, f)| f.joints.len() != self.joints.len()) {
                push(id, format!("frame {t} has {} joints, skeleton has {}", f.joints.len(), self.joints.len()));
                continue;
            }
            for (label, frame, cat) in [
                ("start", clip.start_pose(), clip.category.start()),
                ("end", clip.end_pose(), clip.category.end()),
            ] {
                match canon.get(&cat) {
                    None => push(id, format!("no canonical pose for category {cat}")),
                    Some(c) => {
                        if let Err(e) = tol.check(frame, c) {
                            push(id, format!("{label} pose differs from canonical pose {cat}: {e}"));
                        }
                    }
                }
            }
        }
        for &(a, b) in &self.adjacency {
            for x in [a, b] {
                if !ids.contains(&x) {
                    push(None, format!("adjacency references unknown clip {x}"));
                }
            }
        }
        issues
    }

    /// [`ClipLibrary::lint`] turned into an error when anything is wrong.
    pub fn validate(&self, tol: &PoseTolerance) -> Result<()> {
        let issues = self.lint(tol);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Lint(
                issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"),
            ))
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        schema::read_json(path, schema::CLIP_LIBRARY)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }
}
