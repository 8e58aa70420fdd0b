//! Seeded synthetic rigs for fixtures, tests and benches.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::overlap::OverlapMap;
use super::rig::{forward_kinematics, Joint, SkeletonRig};
use super::skin::SkinBinding;
use crate::mesh::{synth::grid, Mesh};
use crate::Vec3;

#[derive(Debug, Clone)]
pub struct SyntheticRig {
    pub rig: SkeletonRig,
    pub binding: SkinBinding,
    pub neutral: Mesh,
    pub overlap: OverlapMap,
}

fn small_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> UnitQuaternion<f64> {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-6 { Vec3::z() } else { axis.normalize() };
    UnitQuaternion::from_scaled_axis(axis * rng.random_range(-max_angle..max_angle))
}

fn locals_from_absolute(
    names: &[&str],
    parents: &[Option<usize>],
    abs: &[Isometry3<f64>],
) -> Vec<Joint> {
    names
        .iter()
        .zip(parents)
        .enumerate()
        .map(|(j, (name, parent))| {
            let local = match parent {
                Some(p) => abs[*p].inverse() * abs[j],
                None => abs[j],
            };
            Joint {
                name: (*name).to_string(),
                parent: *parent,
                translation: local.translation.vector,
                rotation: local.rotation,
            }
        })
        .collect()
}

/// A 25 x 25 domed face patch (625 vertices) driven by a 14-joint rig with
/// 8 leaf joints, each leaf sitting exactly on a mesh vertex that is bound
/// only to it.
pub fn face_rig(seed: u64) -> SyntheticRig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = grid(25, 25, 0.04);
    for v in &mut mesh.vertices {
        v.z = 0.25 * (1.0 - (v.x * v.x + v.y * v.y) / 0.5);
    }

    let leaf_targets = [
        ("brow_l", -0.24, 0.24),
        ("brow_r", 0.24, 0.24),
        ("forehead", 0.0, 0.32),
        ("cheek_l", -0.32, 0.0),
        ("cheek_r", 0.32, 0.0),
        ("mouth_l", -0.2, -0.24),
        ("mouth_r", 0.2, -0.24),
        ("chin", 0.0, -0.32),
    ];
    let leaf_vertices: Vec<usize> = leaf_targets
        .iter()
        .map(|&(_, x, y)| {
            (0..mesh.vertex_count())
                .min_by(|&a, &b| {
                    let da = (mesh.vertices[a].x - x).hypot(mesh.vertices[a].y - y);
                    let db = (mesh.vertices[b].x - x).hypot(mesh.vertices[b].y - y);
                    da.total_cmp(&db)
                })
                .unwrap()
        })
        .collect();

    let mut names = vec!["root", "spine", "head", "side_l", "side_r", "centre"];
    let mut parents = vec![None, Some(0), Some(1), Some(2), Some(2), Some(2)];
    let mut positions = vec![
        Vec3::new(0.0, -0.2, -1.0),
        Vec3::new(0.0, -0.1, -0.6),
        Vec3::new(0.0, 0.0, -0.3),
        Vec3::new(-0.25, 0.0, -0.1),
        Vec3::new(0.25, 0.0, -0.1),
        Vec3::new(0.0, 0.0, -0.1),
    ];
    for (k, &(name, x, _)) in leaf_targets.iter().enumerate() {
        names.push(name);
        parents.push(Some(if x < -0.1 {
            3
        } else if x > 0.1 {
            4
        } else {
            5
        }));
        positions.push(mesh.vertices[leaf_vertices[k]]);
    }
    let abs: Vec<Isometry3<f64>> = positions
        .iter()
        .map(|p| Isometry3::from_parts(Translation3::from(*p), small_rotation(&mut rng, 0.2)))
        .collect();
    let rig = SkeletonRig::new(locals_from_absolute(&names, &parents, &abs)).expect("valid tree");
    let rest = forward_kinematics(&rig);

    let first_leaf = 6;
    let sigma2 = 0.12f64 * 0.12;
    let weights = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(n, v)| {
            if let Some(k) = leaf_vertices.iter().position(|&lv| lv == n) {
                return vec![(first_leaf + k, 1.0)];
            }
            let mut raw: Vec<(usize, f64)> = vec![(2, 0.05)];
            for k in 0..leaf_targets.len() {
                let d2 = (rest[first_leaf + k].translation.vector - v).norm_squared();
                raw.push((first_leaf + k, (-d2 / sigma2).exp()));
            }
            let sum: f64 = raw.iter().map(|(_, w)| w).sum();
            let mut kept: Vec<(usize, f64)> =
                raw.into_iter().map(|(j, w)| (j, w / sum)).filter(|(_, w)| *w >= 1e-3).collect();
            let s: f64 = kept.iter().map(|(_, w)| w).sum();
            kept.iter_mut().for_each(|(_, w)| *w /= s);
            kept
        })
        .collect();
    let binding = SkinBinding::new(weights, rest).expect("normalized weights");
    let pairs = (0..leaf_targets.len())
        .map(|k| (first_leaf + k, leaf_vertices[k]))
        .collect();
    let overlap = OverlapMap::new(&rig, mesh.vertex_count(), pairs).expect("leaves on vertices");
    SyntheticRig {
        rig,
        binding,
        neutral: mesh,
        overlap,
    }
}

/// Offsets the local translation of `count` distinct leaves by random
/// vectors of length at most `max_offset`. Returns the perturbed rig and
/// the `(joint, offset)` pairs applied.
pub fn perturb_leaves(
    rig: &SkeletonRig,
    count: usize,
    max_offset: f64,
    seed: u64,
) -> (SkeletonRig, Vec<(usize, Vec3)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leaves = rig.leaves();
    let mut chosen = Vec::new();
    while chosen.len() < count.min(leaves.len()) {
        let k = rng.random_range(0..leaves.len());
        chosen.push(leaves.remove(k));
    }
    chosen.sort_unstable();
    let mut out = rig.clone();
    let offsets = chosen
        .into_iter()
        .map(|j| {
            let dir = loop {
                let d = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if d.norm() > 1e-3 && d.norm() <= 1.0 {
                    break d.normalize();
                }
            };
            let offset = dir * rng.random_range(0.2 * max_offset..=max_offset);
            let joint = &rig.joints()[j];
            out.set_local(j, joint.translation + offset, joint.rotation);
            (j, offset)
        })
        .collect();
    (out, offsets)
}

/// Randomly shaped rig and mesh for gradient checks. The rig's locals are
/// displaced from the bind pose so every parameter has a non-trivial
/// gradient.
pub fn random_rig(seed: u64, joints: usize, vertices: usize) -> (SyntheticRig, Vec<Vec3>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..joints).map(|j| format!("j{j}")).collect();
    let bind_joints: Vec<Joint> = (0..joints)
        .map(|j| Joint {
            name: names[j].clone(),
            parent: if j == 0 { None } else { Some(rng.random_range(0..j)) },
            translation: Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ),
            rotation: small_rotation(&mut rng, 1.0),
        })
        .collect();
    let bind = SkeletonRig::new(bind_joints).expect("random tree");
    let rest = forward_kinematics(&bind);
    let verts: Vec<Vec3> = (0..vertices)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let weights = (0..vertices)
        .map(|_| {
            let k = rng.random_range(1..=3.min(joints));
            let mut js: Vec<usize> = Vec::new();
            while js.len() < k {
                let j = rng.random_range(0..joints);
                if !js.contains(&j) {
                    js.push(j);
                }
            }
            let ws: Vec<f64> = js.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = ws.iter().sum();
            js.into_iter().zip(ws).map(|(j, w)| (j, w / s)).collect()
        })
        .collect();
    let binding = SkinBinding::new(weights, rest).expect("normalized");

    let mut posed = bind.clone();
    for j in 0..joints {
        let joint = &bind.joints()[j];
        let t = joint.translation
            + Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            );
        let r = small_rotation(&mut rng, 0.3) * joint.rotation;
        posed.set_local(j, t, r);
    }
    let leaves = posed.leaves();
    let mut used = Vec::new();
    let pairs = leaves
        .into_iter()
        .map(|j| {
            let v = loop {
                let v = rng.random_range(0..vertices);
                if !used.contains(&v) {
                    used.push(v);
                    break v;
                }
            };
            (j, v)
        })
        .collect();
    let overlap = OverlapMap::new(&posed, vertices, pairs).expect("leaves");
    let target: Vec<Vec3> = verts
        .iter()
        .map(|v| {
            let p = Point3::from(*v);
            p.coords
                + Vec3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                )
        })
        .collect();
    let faces = (0..vertices / 3).map(|k| [3 * k, 3 * k + 1, 3 * k + 2]).collect();
    let neutral = Mesh::new(verts, faces).expect("disjoint triangles");
    (
        SyntheticRig {
            rig: posed,
            binding,
            neutral,
            overlap,
        },
        target,
    )
}
