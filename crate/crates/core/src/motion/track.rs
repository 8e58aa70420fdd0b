use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::clip::Category;
use super::pose::Frame;
use crate::mesh::format_coord;
use crate::{schema, Error, Result};

/// Where one clip sits in a composed track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackClip {
    pub clip: usize,
    pub category: Category,
    pub start_frame: usize,
    pub frame_count: usize,
    /// Inserted automatically at a category switch.
    pub inserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionTrack {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub fps: f64,
    pub joints: Vec<String>,
    pub clips: Vec<TrackClip>,
    pub frames: Vec<Frame>,
}

impl MotionTrack {
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn read(path: &Path) -> Result<Self> {
        schema::read_json(path, schema::MOTION_TRACK)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }

    /// BVH-style text: a flat joint list, then one line per frame with the
    /// root translation followed by each joint's root-relative position and
    /// `w x y z` quaternion.
    pub fn to_bvh(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("HIERARCHY\nROOT root\n{\n  CHANNELS 3 Xposition Yposition Zposition\n");
        for (j, name) in self.joint_names().iter().enumerate() {
            let _ = writeln!(
                out,
                "  JOINT {name}\n  {{\n    # index {j}\n    CHANNELS 7 Xposition Yposition Zposition Wquat Xquat Yquat Zquat\n  }}"
            );
        }
        out.push_str("}\nMOTION\n");
        let _ = writeln!(out, "Frames: {}", self.frames.len());
        let _ = writeln!(out, "Frame Time: {}", format_coord(1.0 / self.fps));
        for f in &self.frames {
            let mut vals: Vec<String> = f.root.iter().map(|&x| format_coord(x)).collect();
            for j in &f.joints {
                vals.extend(j.position.iter().chain(&j.rotation).map(|&x| format_coord(x)));
            }
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write_bvh(&self, path: &Path, header: &[String]) -> Result<()> {
        std::fs::write(path, self.to_bvh(header)).map_err(|e| Error::io(path, e))
    }

    fn joint_names(&self) -> Vec<String> {
        let n = self.frames.first().map_or(self.joints.len(), |f| f.joints.len());
        (0..n)
            .map(|j| self.joints.get(j).cloned().unwrap_or_else(|| format!("joint{j}")))
            .collect()
    }
}
