//! Seeded synthetic meshes used by fixtures, tests and benches.

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LandmarkPair, LandmarkRole, LandmarkSet, Mesh, RegionMask, RigidTransform, DEFAULT_TRANSITION_RINGS};
use crate::{schema, Vec3};

/// Regular `cols x rows` grid in the z = 0 plane with spacing `step`,
/// centred on the origin. Every quad is split along the same diagonal, so
/// interior vertices have six neighbors whose mean is the vertex itself.
pub fn grid(cols: usize, rows: usize, step: f64) -> Mesh {
    assert!(cols >= 2 && rows >= 2);
    let cx = (cols - 1) as f64 * step / 2.0;
    let cy = (rows - 1) as f64 * step / 2.0;
    let mut vertices = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(Vec3::new(c as f64 * step - cx, r as f64 * step - cy, 0.0));
        }
    }
    let mut faces = Vec::with_capacity(2 * (cols - 1) * (rows - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let a = r * cols + c;
            let b = a + 1;
            let d = a + cols;
            let e = d + 1;
            faces.push([a, b, e]);
            faces.push([a, e, d]);
        }
    }
    Mesh::new(vertices, faces).expect("grid topology is valid")
}

/// Vertices of `mesh` within `radius` of the xy-origin.
pub fn disk_indices(mesh: &Mesh, radius: f64) -> Vec<usize> {
    mesh.vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| v.x.hypot(v.y) <= radius)
        .map(|(i, _)| i)
        .collect()
}

/// Inputs for the detail-transfer pipeline with a known answer.
#[derive(Debug, Clone)]
pub struct TransferFixture {
    pub initial: Mesh,
    /// `initial` with a raised bump over the centre, then moved by
    /// `transform`.
    pub detail: Mesh,
    pub landmarks: LandmarkPair,
    pub mask: RegionMask,
    /// Rigid motion applied to the detail mesh; alignment should undo it.
    pub transform: RigidTransform,
}

/// Radius of the replaceable disk in [`bump_fixture`].
pub const BUMP_RADIUS: f64 = 0.08;

/// A 41 x 41 domed patch. The detail mesh carries a plateau-topped bump
/// that still stands 4 mm high at the replaceable boundary, so the
/// transferred mesh has a step at the seam for smoothing to remove.
pub fn bump_fixture(seed: u64) -> TransferFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial = grid(41, 41, 0.01);
    for v in &mut initial.vertices {
        v.z = 0.05 * (1.0 - (v.x * v.x + v.y * v.y) / 0.08);
    }
    let raised: Vec<Vec3> = initial
        .vertices
        .iter()
        .map(|v| {
            let r2 = v.x * v.x + v.y * v.y;
            if r2.sqrt() <= BUMP_RADIUS + 0.02 {
                v + Vec3::new(0.0, 0.0, 0.004 + 0.006 * (-r2 / 0.002).exp())
            } else {
                *v
            }
        })
        .collect();
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0).normalize();
    let transform = RigidTransform {
        rotation: *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.random_range(0.1..0.4)).matrix(),
        translation: Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
        scale: 1.0,
    };
    let detail = initial.with_vertices(transform.apply_all(&raised)).expect("same topology");
    let corners = [(-0.15, -0.15), (0.15, -0.15), (-0.15, 0.15), (0.15, 0.15), (0.0, 0.18), (-0.18, 0.0), (0.17, 0.02)];
    let indices: Vec<usize> = corners
        .iter()
        .map(|&(x, y)| {
            (0..initial.vertex_count())
                .min_by(|&a, &b| {
                    let pa = initial.vertices[a];
                    let pb = initial.vertices[b];
                    (pa.x - x).hypot(pa.y - y).total_cmp(&(pb.x - x).hypot(pb.y - y))
                })
                .unwrap()
        })
        .collect();
    let landmarks = LandmarkPair {
        schema: schema::LANDMARKS.into(),
        detail: LandmarkSet::new(LandmarkRole::Alignment, indices.clone()).expect("seven"),
        initial: LandmarkSet::new(LandmarkRole::Alignment, indices).expect("seven"),
    };
    let mask = RegionMask::from_replaceable(&initial, &disk_indices(&initial, BUMP_RADIUS), DEFAULT_TRANSITION_RINGS)
        .expect("disk inside the patch");
    TransferFixture {
        initial,
        detail,
        landmarks,
        mask,
        transform,
    }
}
