use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Similarity transform `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn apply_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    /// Orthonormal with determinant +1 and positive scale.
    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).abs().max() < tol
            && (r.determinant() - 1.0).abs() < tol
            && self.scale > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub transform: RigidTransform,
    /// Root-mean-square distance between transformed source and target.
    pub rmse: f64,
}

/// Relative singular-value floor below which a centred point cloud is
/// treated as collinear or coincident.
const DEGENERACY_RATIO: f64 = 1e-9;

/// Least-squares rigid (optionally similarity) transform taking `source`
/// onto `target`, via the SVD of the cross-covariance with a reflection fix.
pub fn rigid_align(source: &[Vec3], target: &[Vec3], allow_scale: bool) -> Result<Alignment> {
    if source.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::AlignmentDegenerate(format!(
            "need at least 3 point pairs, got {}",
            source.len()
        )));
    }
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;

    check_spread(source, &cs, "source")?;
    check_spread(target, &ct, "target")?;

    let mut cov = Matrix3::zeros();
    let mut source_var = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = s - cs;
        cov += ds * (t - ct).transpose();
        source_var += ds.norm_squared();
    }

    let svd = SVD::new(cov, true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let sigma = svd.singular_values;

    let d = (v * u.transpose()).determinant().signum();
    let smallest = sigma.imin();
    let mut diag = Matrix3::identity();
    diag[(smallest, smallest)] = d;
    let rotation = v * diag * u.transpose();

    let scale = if allow_scale {
        let trace: f64 = (0..3).map(|k| sigma[k] * diag[(k, k)]).sum();
        trace / source_var
    } else {
        1.0
    };
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::AlignmentDegenerate(format!("non-positive scale {scale}")));
    }
    let translation = ct - scale * (rotation * cs);
    let transform = RigidTransform {
        rotation,
        translation,
        scale,
    };
    let sq: f64 = source
        .iter()
        .zip(target)
        .map(|(s, t)| (transform.apply(s) - t).norm_squared())
        .sum();
    Ok(Alignment {
        transform,
        rmse: (sq / n).sqrt(),
    })
}

fn check_spread(points: &[Vec3], centroid: &Vec3, which: &str) -> Result<()> {
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let mut ev: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= f64::MIN_POSITIVE {
        return Err(Error::AlignmentDegenerate(format!("{which} points coincide")));
    }
    if ev[1].max(0.0).sqrt() <= DEGENERACY_RATIO * ev[0].sqrt() {
        return Err(Error::AlignmentDegenerate(format!("{which} points are collinear")));
    }
    Ok(())
}
