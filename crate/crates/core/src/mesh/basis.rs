use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{schema, Error, Result, Vec3};

/// Linear shape model over a vertex block: `base + sum_i coefficient_i * basis_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeBasisSet {
    pub schema: String,
    /// Indices of the region's vertices in the full head mesh.
    pub region: Vec<usize>,
    pub base: Vec<[f64; 3]>,
    pub bases: Vec<Vec<[f64; 3]>>,
    pub coefficients: Vec<f64>,
}

pub const DEFAULT_BASIS_COUNT: usize = 80;

impl ShapeBasisSet {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.bases.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} bases",
                self.coefficients.len(),
                self.bases.len()
            )));
        }
        if let Some((i, b)) = self
            .bases
            .iter()
            .enumerate()
            .find(|(_, b)| b.len() != self.base.len())
        {
            return Err(Error::Dimension(format!(
                "basis {i} has {} vertices, region has {}",
                b.len(),
                self.base.len()
            )));
        }
        if !self.region.is_empty() && self.region.len() != self.base.len() {
            return Err(Error::Dimension(format!(
                "{} region indices for {} base vertices",
                self.region.len(),
                self.base.len()
            )));
        }
        Ok(())
    }

    /// Seeded smooth displacement fields: each basis is a sum of three
    /// Gaussian bumps centred on random region vertices.
    pub fn synthetic(region: Vec<usize>, base: Vec<Vec3>, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = base.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let extent = (hi - lo).norm().max(1e-9);
        let width = 0.25 * extent;
        let bases = (0..count)
            .map(|_| {
                let bumps: Vec<(Vec3, Vec3)> = (0..3)
                    .map(|_| {
                        let centre = base[rng.random_range(0..base.len())];
                        let dir = Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        ) * (0.02 * extent);
                        (centre, dir)
                    })
                    .collect();
                base.iter()
                    .map(|p| {
                        let d: Vec3 = bumps
                            .iter()
                            .map(|(c, dir)| dir * (-(p - c).norm_squared() / (width * width)).exp())
                            .sum();
                        [d.x, d.y, d.z]
                    })
                    .collect()
            })
            .collect();
        Self {
            schema: schema::SHAPE_BASIS.into(),
            region,
            base: base.iter().map(|p| [p.x, p.y, p.z]).collect(),
            bases,
            coefficients: vec![0.0; count],
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let set: Self = schema::read_json(path, schema::SHAPE_BASIS)?;
        set.validate().map_err(|e| Error::schema(path, e))?;
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }
}

/// Evaluates the region geometry for the set's coefficients.
///
/// The displacement sum is accumulated first and added to the base last, so
/// all-zero coefficients return the base bit-for-bit.
pub fn apply_shape_basis(set: &ShapeBasisSet) -> Result<Vec<Vec3>> {
    set.validate()?;
    let mut disp = vec![Vec3::zeros(); set.base.len()];
    for (alpha, basis) in set.coefficients.iter().zip(&set.bases) {
        for (d, s) in disp.iter_mut().zip(basis) {
            *d += *alpha * Vec3::from(*s);
        }
    }
    Ok(set
        .base
        .iter()
        .zip(disp)
        .map(|(b, d)| Vec3::from(*b) + d)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_set() -> ShapeBasisSet {
        let base: Vec<Vec3> = (0..30)
            .map(|i| Vec3::new((i % 6) as f64 * 0.01, (i / 6) as f64 * 0.01, 0.1 + 0.001 * i as f64))
            .collect();
        ShapeBasisSet::synthetic((0..30).collect(), base, DEFAULT_BASIS_COUNT, 3)
    }

    #[test]
    fn zero_coefficients_return_base_exactly() {
        let set = small_set();
        let v = apply_shape_basis(&set).unwrap();
        for (p, b) in v.iter().zip(&set.base) {
            assert_eq!([p.x, p.y, p.z], *b);
        }
    }

    #[test]
    fn single_basis_scales_linearly() {
        let mut set = small_set();
        set.coefficients[0] = 2.0;
        let v = apply_shape_basis(&set).unwrap();
        for ((p, b), s) in v.iter().zip(&set.base).zip(&set.bases[0]) {
            let d = p - Vec3::from(*b);
            assert!((d - 2.0 * Vec3::from(*s)).norm() < 1e-15);
        }
    }

    #[test]
    fn doubling_coefficients_doubles_displacement() {
        let mut set = small_set();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        set.coefficients = (0..set.bases.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v1 = apply_shape_basis(&set).unwrap();
        // direct summation oracle
        for (k, p) in v1.iter().enumerate() {
            let mut expect = Vec3::from(set.base[k]);
            for (a, s) in set.coefficients.iter().zip(&set.bases) {
                expect += *a * Vec3::from(s[k]);
            }
            assert!((p - expect).norm() < 1e-12);
        }
        set.coefficients.iter_mut().for_each(|a| *a *= 2.0);
        let v2 = apply_shape_basis(&set).unwrap();
        for ((p1, p2), b) in v1.iter().zip(&v2).zip(&set.base) {
            let b = Vec3::from(*b);
            assert!(((p2 - b) - 2.0 * (p1 - b)).norm() < 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut set = small_set();
        set.coefficients.pop();
        assert!(matches!(apply_shape_basis(&set), Err(Error::Dimension(_))));
    }
}
