use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Deterministic stand-in for an engine's color response.
pub trait RendererOracle: Sync {
    fn render(&self, c: [f64; 3]) -> [f64; 3];

    /// Source color rendering to `c`, if known and inside the unit cube.
    fn invert(&self, _c: [f64; 3]) -> Option<[f64; 3]> {
        None
    }
}

impl<F: Fn([f64; 3]) -> [f64; 3] + Sync> RendererOracle for F {
    fn render(&self, c: [f64; 3]) -> [f64; 3] {
        self(c)
    }
}

/// Built-in oracles selectable by name from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OraclePreset {
    Identity,
    /// `scale * c + offset` per channel.
    Affine { scale: f64, offset: f64 },
    /// `c^gamma` per channel.
    Gamma { gamma: f64 },
    /// Per-channel gamma, then a 3x3 color matrix, then clamp to `[0, 1]`.
    GammaMatrix { gamma: f64, matrix: [[f64; 3]; 3] },
}

/// Near-identity mixing matrix with unit row sums, so white maps to white.
/// Mild enough that every color in `[0.05, 0.95]^3` stays reachable.
pub const DEFAULT_MIX: [[f64; 3]; 3] = [[0.96, 0.03, 0.01], [0.02, 0.96, 0.02], [0.01, 0.03, 0.96]];

impl OraclePreset {
    pub const NAMES: [&'static str; 4] = ["identity", "affine", "gamma", "gamma-matrix"];

    /// Preset by name with its default parameters.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::Identity),
            "affine" => Ok(Self::Affine {
                scale: 0.8,
                offset: 0.1,
            }),
            "gamma" => Ok(Self::Gamma { gamma: 2.2 }),
            "gamma-matrix" => Ok(Self::GammaMatrix {
                gamma: 2.2,
                matrix: DEFAULT_MIX,
            }),
            other => Err(Error::Invalid(format!(
                "unknown oracle preset `{other}` (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Affine { .. } => "affine",
            Self::Gamma { .. } => "gamma",
            Self::GammaMatrix { .. } => "gamma-matrix",
        }
    }
}

impl Default for OraclePreset {
    fn default() -> Self {
        Self::named("gamma-matrix").unwrap()
    }
}

impl RendererOracle for OraclePreset {
    fn render(&self, c: [f64; 3]) -> [f64; 3] {
        match self {
            Self::Identity => c,
            Self::Affine { scale, offset } => c.map(|x| scale * x + offset),
            Self::Gamma { gamma } => c.map(|x| x.max(0.0).powf(*gamma)),
            Self::GammaMatrix { gamma, matrix } => {
                let g = c.map(|x| x.max(0.0).powf(*gamma));
                let mut out = [0.0; 3];
                for (o, row) in out.iter_mut().zip(matrix) {
                    *o = (row[0] * g[0] + row[1] * g[1] + row[2] * g[2]).clamp(0.0, 1.0);
                }
                out
            }
        }
    }

    fn invert(&self, c: [f64; 3]) -> Option<[f64; 3]> {
        let src = match self {
            Self::Identity => c,
            Self::Affine { scale, offset } => c.map(|x| (x - offset) / scale),
            Self::Gamma { gamma } => c.map(|x| x.max(0.0).powf(1.0 / gamma)),
            Self::GammaMatrix { gamma, matrix } => {
                let m = nalgebra::Matrix3::from_fn(|r, k| matrix[r][k]);
                let g = m.try_inverse()? * nalgebra::Vector3::from(c);
                if g.iter().any(|x| *x < 0.0) {
                    return None;
                }
                [g.x, g.y, g.z].map(|x| x.powf(1.0 / gamma))
            }
        };
        src.iter().all(|x| (0.0..=1.0).contains(x)).then_some(src)
    }
}
