//! Indexed triangle meshes and the facial detail-transfer pipeline.
//!
//! The pipeline runs [`rigid_align`] on a seven-landmark set, moves the
//! replaceable region onto the aligned detail mesh with
//! [`transfer_details`], then relaxes the seam with [`smooth_transition`].
//! [`ShapeBasisSet`] evaluates linear nose shape bases over a vertex block.

mod align;
mod basis;
mod landmarks;
mod obj;
mod pipeline;
mod region;
mod smooth;
pub mod synth;
mod transfer;

pub use align::{rigid_align, Alignment, RigidTransform};
pub use basis::{apply_shape_basis, ShapeBasisSet, DEFAULT_BASIS_COUNT};
pub use landmarks::{LandmarkPair, LandmarkRole, LandmarkSet};
pub use obj::{format_coord, read_obj, write_obj};
pub use pipeline::{transfer_pipeline, TransferConfig, TransferOutcome, TransferReport};
pub use region::{RegionLabel, RegionMask, DEFAULT_TRANSITION_RINGS};
pub use smooth::{laplacian_magnitudes, smooth_transition, SmoothingConfig};
pub use transfer::{transfer_details, Anchor, Correspondence};

use crate::{Error, Result, Vec3};

/// Triangle mesh with fixed vertex topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self {
            vertices,
            faces,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Topology(format!(
                    "face {fi} references vertex out of range ({f:?}, {n} vertices)"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::Topology(format!(
                    "{} normals for {n} vertices",
                    normals.len()
                )));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Same faces, new positions. Fails if the vertex count changes.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Topology(format!(
                "vertex count changed from {} to {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            normals: None,
        })
    }

    /// Sorted, de-duplicated edge neighbors of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
        for list in &mut nbrs {
            list.sort_unstable();
            list.dedup();
        }
        nbrs
    }

    /// Area-weighted vertex normals.
    pub fn compute_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i]);
            let n = (b - a).cross(&(c - a));
            for &i in f {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }
}
