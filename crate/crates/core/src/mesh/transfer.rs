use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mesh, RegionLabel, RegionMask};
use crate::{par, schema, Error, Result, Vec3};

/// Barycentric location on one face of the detail mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub face: usize,
    pub bary: [f64; 3],
}

impl Anchor {
    pub fn position(&self, mesh: &Mesh) -> Result<Vec3> {
        let f = mesh.faces.get(self.face).ok_or_else(|| {
            Error::Topology(format!(
                "anchor face {} out of range ({} faces)",
                self.face,
                mesh.faces.len()
            ))
        })?;
        Ok(f.iter()
            .zip(self.bary)
            .map(|(&i, w)| w * mesh.vertices[i])
            .sum())
    }
}

/// Map from initial-mesh vertex to its anchor on the detail surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correspondence {
    anchors: BTreeMap<usize, Anchor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrespondenceFile {
    schema: String,
    anchors: Vec<AnchorRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorRecord {
    vertex: usize,
    face: usize,
    bary: [f64; 3],
}

impl Correspondence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, vertex: usize, anchor: Anchor) {
        self.anchors.insert(vertex, anchor);
    }

    pub fn get(&self, vertex: usize) -> Option<&Anchor> {
        self.anchors.get(&vertex)
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Anchors each listed vertex of `initial` at its nearest point on the
    /// surface of `detail`. Ties between faces go to the lower face index.
    pub fn project(initial: &Mesh, detail: &Mesh, vertices: &[usize]) -> Result<Self> {
        if detail.faces.is_empty() {
            return Err(Error::Topology("detail mesh has no faces".into()));
        }
        if let Some(&bad) = vertices.iter().find(|&&v| v >= initial.vertex_count()) {
            return Err(Error::Invalid(format!("vertex {bad} out of range")));
        }
        let anchors = par::map_slice(vertices, |&v| {
            let p = initial.vertices[v];
            let mut best = (f64::INFINITY, Anchor { face: 0, bary: [1.0, 0.0, 0.0] });
            for (fi, f) in detail.faces.iter().enumerate() {
                let [a, b, c] = f.map(|i| detail.vertices[i]);
                let bary = closest_point_barycentric(&p, &a, &b, &c);
                let q = bary[0] * a + bary[1] * b + bary[2] * c;
                let d = (q - p).norm_squared();
                if d < best.0 {
                    best = (d, Anchor { face: fi, bary });
                }
            }
            (v, best.1)
        });
        Ok(Self {
            anchors: anchors.into_iter().collect(),
        })
    }

    /// Identity anchors for meshes that share topology: every vertex sits at
    /// a corner of the first face that uses it.
    pub fn shared_topology(mesh: &Mesh, vertices: &[usize]) -> Result<Self> {
        let mut first_face = vec![None; mesh.vertex_count()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                first_face[v].get_or_insert((fi, k));
            }
        }
        let mut out = Self::new();
        for &v in vertices {
            let (face, corner) = first_face
                .get(v)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Topology(format!("vertex {v} is not used by any face")))?;
            let mut bary = [0.0; 3];
            bary[corner] = 1.0;
            out.insert(v, Anchor { face, bary });
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: CorrespondenceFile = schema::read_json(path, schema::CORRESPONDENCE)?;
        Ok(Self {
            anchors: file
                .anchors
                .into_iter()
                .map(|r| (r.vertex, Anchor { face: r.face, bary: r.bary }))
                .collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(
            path,
            &CorrespondenceFile {
                schema: schema::CORRESPONDENCE.into(),
                anchors: self
                    .anchors
                    .iter()
                    .map(|(&vertex, a)| AnchorRecord {
                        vertex,
                        face: a.face,
                        bary: a.bary,
                    })
                    .collect(),
            },
        )
    }
}

/// Moves every replaceable vertex of `initial` to its anchored position on
/// the (already aligned) `detail` mesh. Other vertices are copied untouched.
pub fn transfer_details(
    initial: &Mesh,
    detail: &Mesh,
    mask: &RegionMask,
    correspondence: &Correspondence,
) -> Result<Mesh> {
    if mask.labels().len() != initial.vertex_count() {
        return Err(Error::Dimension(format!(
            "mask has {} labels, mesh has {} vertices",
            mask.labels().len(),
            initial.vertex_count()
        )));
    }
    let mut vertices = initial.vertices.clone();
    for v in mask.indices_of(RegionLabel::Replaceable) {
        let anchor = correspondence
            .get(v)
            .ok_or(Error::IncompleteCorrespondence(v))?;
        vertices[v] = anchor.position(detail)?;
    }
    initial.with_vertices(vertices)
}

/// Barycentric coordinates of the point of triangle `abc` closest to `p`.
fn closest_point_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::synth::{disk_indices, grid};

    fn setup() -> (Mesh, RegionMask) {
        let mesh = grid(21, 21, 0.01);
        let rep = disk_indices(&mesh, 0.06);
        let mask = RegionMask::from_replaceable(&mesh, &rep, 2).unwrap();
        (mesh, mask)
    }

    #[test]
    fn identical_detail_is_identity() {
        let (mesh, mask) = setup();
        let corr = Correspondence::project(&mesh, &mesh, &mask.indices_of(RegionLabel::Replaceable))
            .unwrap();
        let out = transfer_details(&mesh, &mesh, &mask, &corr).unwrap();
        assert_eq!(out, mesh);
    }

    #[test]
    fn normal_offset_moves_only_replaceable() {
        let (mesh, mask) = setup();
        let rep = mask.indices_of(RegionLabel::Replaceable);
        let normals = mesh.compute_normals();
        let mut detail = mesh.clone();
        for &v in &rep {
            detail.vertices[v] += 0.001 * normals[v];
        }
        let corr = Correspondence::shared_topology(&mesh, &rep).unwrap();
        let out = transfer_details(&mesh, &detail, &mask, &corr).unwrap();
        for v in 0..mesh.vertex_count() {
            let moved = out.vertices[v] - mesh.vertices[v];
            if mask.label(v) == RegionLabel::Replaceable {
                assert!((moved - 0.001 * normals[v]).norm() < 1e-15);
            } else {
                assert_eq!(out.vertices[v], mesh.vertices[v]);
            }
        }
        // nearest-point projection agrees wherever the whole one-ring moved
        let projected = Correspondence::project(&mesh, &detail, &rep).unwrap();
        let out2 = transfer_details(&mesh, &detail, &mask, &projected).unwrap();
        let nbrs = mesh.vertex_neighbors();
        for &v in rep.iter().filter(|&&v| nbrs[v].iter().all(|&u| mask.label(u) == RegionLabel::Replaceable)) {
            assert!((out2.vertices[v] - detail.vertices[v]).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_replaceable_region_is_identity() {
        let mesh = grid(6, 6, 1.0);
        let mask = RegionMask::from_replaceable(&mesh, &[], 3).unwrap();
        let out = transfer_details(&mesh, &mesh, &mask, &Correspondence::new()).unwrap();
        assert_eq!(out, mesh);
    }

    #[test]
    fn missing_anchor_is_reported() {
        let (mesh, mask) = setup();
        let rep = mask.indices_of(RegionLabel::Replaceable);
        let corr = Correspondence::shared_topology(&mesh, &rep[1..]).unwrap();
        assert!(matches!(
            transfer_details(&mesh, &mesh, &mask, &corr),
            Err(Error::IncompleteCorrespondence(v)) if v == rep[0]
        ));
    }

    #[test]
    fn closest_point_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(closest_point_barycentric(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), [1.0, 0.0, 0.0]);
        assert_eq!(closest_point_barycentric(&Vec3::new(0.5, -1.0, 3.0), &a, &b, &c), [0.5, 0.5, 0.0]);
        let inside = closest_point_barycentric(&Vec3::new(0.25, 0.25, 1.0), &a, &b, &c);
        assert!((inside[0] - 0.5).abs() < 1e-15 && (inside[1] - 0.25).abs() < 1e-15);
    }
}
