use serde::{Deserialize, Serialize};

use super::{Mesh, RegionLabel, RegionMask};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub iterations: usize,
    pub lambda: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            lambda: 0.5,
        }
    }
}

/// Umbrella-operator relaxation of the transition band.
///
/// Each iteration computes `mean(neighbors) - v` for every transition vertex
/// from the previous iterate, then moves it by `lambda` times that vector.
/// Fixed and replaceable vertices act as boundary conditions.
pub fn smooth_transition(mesh: &Mesh, mask: &RegionMask, config: &SmoothingConfig) -> Result<Mesh> {
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(Error::Invalid(format!(
            "smoothing lambda must lie in [0, 1], got {}",
            config.lambda
        )));
    }
    if mask.labels().len() != mesh.vertex_count() {
        return Err(Error::Dimension(format!(
            "mask has {} labels, mesh has {} vertices",
            mask.labels().len(),
            mesh.vertex_count()
        )));
    }
    let band = mask.indices_of(RegionLabel::Transition);
    if band.is_empty() || config.iterations == 0 || config.lambda == 0.0 {
        return Ok(mesh.clone());
    }
    let nbrs = mesh.vertex_neighbors();
    let mut verts = mesh.vertices.clone();
    for _ in 0..config.iterations {
        let deltas: Vec<Vec3> = band.iter().map(|&v| umbrella(&verts, &nbrs[v], v)).collect();
        for (&v, d) in band.iter().zip(deltas) {
            verts[v] += config.lambda * d;
        }
    }
    mesh.with_vertices(verts)
}

/// `|mean(neighbors) - v|` for each listed vertex.
pub fn laplacian_magnitudes(mesh: &Mesh, vertices: &[usize]) -> Vec<f64> {
    let nbrs = mesh.vertex_neighbors();
    vertices
        .iter()
        .map(|&v| umbrella(&mesh.vertices, &nbrs[v], v).norm())
        .collect()
}

fn umbrella(verts: &[Vec3], nbrs: &[usize], v: usize) -> Vec3 {
    if nbrs.is_empty() {
        return Vec3::zeros();
    }
    let mean = nbrs.iter().map(|&u| verts[u]).sum::<Vec3>() / nbrs.len() as f64;
    mean - verts[v]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::synth::{disk_indices, grid};
    use proptest::prelude::*;

    #[test]
    fn zero_iterations_or_lambda_is_identity() {
        let mut mesh = grid(9, 9, 1.0);
        mesh.vertices[40].z = 1.0;
        let mask = RegionMask::from_replaceable(&mesh, &disk_indices(&mesh, 1.5), 1).unwrap();
        for cfg in [
            SmoothingConfig { iterations: 0, lambda: 0.5 },
            SmoothingConfig { iterations: 5, lambda: 0.0 },
        ] {
            assert_eq!(smooth_transition(&mesh, &mask, &cfg).unwrap(), mesh);
        }
    }

    #[test]
    fn single_spike_collapses_with_full_lambda() {
        let mut mesh = grid(5, 5, 1.0);
        mesh.vertices[12].z = 1.0;
        let mut labels = vec![RegionLabel::Fixed; 25];
        labels[12] = RegionLabel::Transition;
        let mask = RegionMask::from_labels(&mesh, labels).unwrap();
        let out = smooth_transition(&mesh, &mask, &SmoothingConfig { iterations: 1, lambda: 1.0 })
            .unwrap();
        assert_eq!(out.vertices[12].z, 0.0);
        assert_eq!(out.faces, mesh.faces);
    }

    #[test]
    fn lambda_out_of_range_is_rejected() {
        let mesh = grid(3, 3, 1.0);
        let mask = RegionMask::from_replaceable(&mesh, &[4], 1).unwrap();
        assert!(smooth_transition(&mesh, &mask, &SmoothingConfig { iterations: 1, lambda: 1.5 }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn max_laplacian_never_grows(seed in any::<u64>(), lambda in 0.05f64..=1.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut mesh = grid(15, 15, 0.1);
            for v in &mut mesh.vertices {
                let r2 = v.x * v.x + v.y * v.y;
                v.z = 0.3 * (-r2 / 0.1).exp() + 0.02 * rng.random_range(-1.0..1.0);
            }
            let mask = RegionMask::from_replaceable(&mesh, &disk_indices(&mesh, 0.35), 2).unwrap();
            let band = mask.indices_of(RegionLabel::Transition);
            let max = |m: &Mesh| laplacian_magnitudes(m, &band).into_iter().fold(0.0, f64::max);
            let mut cur = mesh.clone();
            let mut prev = max(&cur);
            for _ in 0..10 {
                cur = smooth_transition(&cur, &mask, &SmoothingConfig { iterations: 1, lambda }).unwrap();
                let m = max(&cur);
                prop_assert!(m <= prev + 1e-12, "{m} > {prev}");
                prev = m;
            }
        }
    }
}
