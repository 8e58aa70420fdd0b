use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::RendererOracle;
use crate::{Error, Result};

pub const DEFAULT_PAIR_COUNT: usize = 10_000;

/// A source color and what the renderer made of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorSample {
    /// Color fed to the renderer (C′).
    pub source: [f64; 3],
    /// Rendered result (C).
    pub rendered: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    /// Uniform jitter as a fraction of the lattice spacing (0 disables).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { jitter: 0.5, seed: 0 }
    }
}

fn lattice_side(n: usize) -> usize {
    let mut k = (n as f64).cbrt().round() as usize;
    while k * k * k < n {
        k += 1;
    }
    while k > 1 && (k - 1).pow(3) >= n {
        k -= 1;
    }
    k
}

/// Samples `n` source colors on a jittered `k^3` lattice spanning the cube
/// and renders each one. Only interior lattice coordinates are jittered. When `k^3 > n` a seeded subset of lattice cells is
/// kept, in lattice order.
pub fn generate_training_pairs(
    oracle: &dyn RendererOracle,
    n: usize,
    config: &PairConfig,
) -> Result<Vec<ColorSample>> {
    if n == 0 {
        return Err(Error::Invalid("pair count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.jitter) {
        return Err(Error::Invalid(format!("jitter {} outside [0, 1]", config.jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = lattice_side(n);
    let cells = k * k * k;
    let mut keep: Vec<usize> = if cells > n {
        // Drop interior cells first so the cube's surface stays fully
        // sampled whenever n allows it.
        let on_surface = |c: usize| [c / (k * k), (c / k) % k, c % k].iter().any(|&i| i == 0 || i + 1 == k);
        let (surface, interior): (Vec<usize>, Vec<usize>) = (0..cells).partition(|&c| on_surface(c));
        if surface.len() <= n {
            let mut keep = surface;
            let extra = sample(&mut rng, interior.len(), n - keep.len());
            keep.extend(extra.into_iter().map(|i| interior[i]));
            keep
        } else {
            sample(&mut rng, cells, n).into_vec()
        }
    } else {
        (0..cells).collect()
    };
    keep.sort_unstable();
    let spacing = if k > 1 { 1.0 / (k - 1) as f64 } else { 1.0 };
    let coord = |i: usize| if k > 1 { i as f64 * spacing } else { 0.5 };
    Ok(keep
        .into_iter()
        .map(|cell| {
            let idx = [cell / (k * k), (cell / k) % k, cell % k];
            let source = idx.map(|i| {
                // Boundary coordinates stay put so the faces, edges and
                // corners of the cube are always sampled.
                let j = if config.jitter > 0.0 && i > 0 && i + 1 < k {
                    rng.random_range(-0.5..0.5) * config.jitter * spacing
                } else {
                    0.0
                };
                (coord(i) + j).clamp(0.0, 1.0)
            });
            ColorSample {
                source,
                rendered: oracle.render(source),
            }
        })
        .collect())
}

/// Interior channel range for held-out evaluation.
pub const INTERIOR: (f64, f64) = (0.05, 0.95);

/// Held-out pairs whose rendered colors are uniform in `[0.05, 0.95]^3`.
/// Sources come from the oracle's inverse; colors the oracle cannot reach
/// are redrawn.
pub fn interior_samples(oracle: &dyn RendererOracle, count: usize, seed: u64) -> Result<Vec<ColorSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > 100 * count.max(1) {
            return Err(Error::Invalid(
                "oracle has no known inverse over most of the interior".into(),
            ));
        }
        let rendered = [0; 3].map(|_| rng.random_range(INTERIOR.0..=INTERIOR.1));
        if let Some(source) = oracle.invert(rendered) {
            out.push(ColorSample { source, rendered });
        }
    }
    Ok(out)
}

/// Fraction of samples with `‖oracle(correct(C)) − C‖∞ < tol`.
pub fn round_trip_fraction(
    oracle: &dyn RendererOracle,
    correct: impl Fn([f64; 3]) -> [f64; 3] + Sync,
    samples: &[ColorSample],
    tol: f64,
) -> f64 {
    let hits = crate::par::map_slice(samples, |s| {
        let back = oracle.render(correct(s.rendered));
        back.iter().zip(&s.rendered).all(|(a, b)| (a - b).abs() < tol)
    });
    hits.iter().filter(|h| **h).count() as f64 / samples.len().max(1) as f64
}

pub const PAIR_HEADER: [&str; 6] = ["r_src", "g_src", "b_src", "r", "g", "b"];

/// Reads `r′,g′,b′,r,g,b` rows. An optional header row and `#` comment
/// lines are skipped.
pub fn read_pairs(path: &Path) -> Result<Vec<ColorSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::schema(path, e))?;
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::schema(path, e))?;
        if row == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != 6 {
            return Err(Error::schema(path, format!("row {} has {} fields, expected 6", row + 1, rec.len())));
        }
        let mut v = [0.0; 6];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .parse()
                .map_err(|_| Error::schema(path, format!("row {}: `{field}` is not a number", row + 1)))?;
        }
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::schema(path, format!("row {}: channel outside [0, 1]", row + 1)));
        }
        out.push(ColorSample {
            source: [v[0], v[1], v[2]],
            rendered: [v[3], v[4], v[5]],
        });
    }
    Ok(out)
}

/// Writes pairs as CSV with `header` lines emitted as `#` comments.
pub fn write_pairs(path: &Path, pairs: &[ColorSample], header: &[String]) -> Result<()> {
    let mut text = String::new();
    for line in header {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(PAIR_HEADER).map_err(err)?;
    for p in pairs {
        w.write_record(p.source.iter().chain(&p.rendered).map(|x| x.to_string()))
            .map_err(err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
