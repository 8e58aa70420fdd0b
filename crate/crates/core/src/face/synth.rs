//! Seeded feature/coefficient pairs from a known linear map, plus a small
//! template set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::interject::{InterjectionTemplate, TemplateSet};
use super::track::{AudioFeatureTrack, RigCoefficientTrack};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub controls: usize,
    pub feature_dim: usize,
    pub tracks: usize,
    pub frames: usize,
    pub fps: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            controls: 20,
            feature_dim: 8,
            tracks: 4,
            frames: 1500,
            fps: 50.0,
        }
    }
}

/// Ground truth `b = clamp(c + W f)` and the tracks drawn from it.
#[derive(Debug, Clone)]
pub struct LinearFixture {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub features: Vec<AudioFeatureTrack>,
    pub targets: Vec<RigCoefficientTrack>,
}

pub fn control_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("ctrl_{i:02}")).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Smooth features: per dimension a sum of three sinusoids at speech-like
/// rates (0.5 to 6 Hz) with random phase, plus a little noise.
fn feature_track(cfg: &FixtureConfig, rng: &mut ChaCha8Rng) -> AudioFeatureTrack {
    let waves: Vec<Vec<(f64, f64, f64)>> = (0..cfg.feature_dim)
        .map(|_| {
            (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.3..1.0),
                        rng.random_range(0.5..6.0) * std::f64::consts::TAU,
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect()
        })
        .collect();
    let frames = (0..cfg.frames)
        .map(|t| {
            let s = t as f64 / cfg.fps;
            waves
                .iter()
                .map(|w| w.iter().map(|(a, f, p)| a * (f * s + p).sin()).sum::<f64>() + 0.02 * gaussian(rng))
                .collect()
        })
        .collect();
    AudioFeatureTrack::new(cfg.fps, frames).expect("well-formed features")
}

/// Tracks for one ground-truth map. The same `seed` always gives the same
/// map; `track_seed` varies only the feature signals, so held-out tracks
/// can be drawn from the same map.
pub fn linear_fixture(cfg: &FixtureConfig, seed: u64, track_seed: u64) -> LinearFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gain = 0.12 / (cfg.feature_dim as f64).sqrt();
    let weights: Vec<Vec<f64>> =
        (0..cfg.controls).map(|_| (0..cfg.feature_dim).map(|_| gain * gaussian(&mut rng)).collect()).collect();
    let bias: Vec<f64> = (0..cfg.controls).map(|_| rng.random_range(0.3..0.7)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(track_seed ^ 0x5eed_face);
    let features: Vec<AudioFeatureTrack> = (0..cfg.tracks).map(|_| feature_track(cfg, &mut rng)).collect();
    let targets = features
        .iter()
        .map(|f| {
            let values = f
                .frames
                .iter()
                .map(|x| {
                    weights
                        .iter()
                        .zip(&bias)
                        .map(|(w, c)| (c + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).clamp(0.0, 1.0))
                        .collect()
                })
                .collect();
            RigCoefficientTrack::new(cfg.fps, control_names(cfg.controls), values).expect("clamped values")
        })
        .collect();
    LinearFixture {
        weights,
        bias,
        features,
        targets,
    }
}

/// Two templates, `wow` and `oh`, about a second long with 0.2 s blends.
pub fn templates(controls: usize, fps: f64, seed: u64) -> TemplateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = fps.round() as usize;
    let make = |token: &str, rng: &mut ChaCha8Rng| {
        let peak: Vec<f64> = (0..controls).map(|_| rng.random_range(0.0..1.0)).collect();
        InterjectionTemplate {
            token: token.into(),
            values: (0..len)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (len - 1) as f64).sin();
                    peak.iter().map(|p| p * (0.6 + 0.4 * s)).collect()
                })
                .collect(),
            blend_in: 0.2,
            blend_out: 0.2,
        }
    };
    let list = vec![make("wow", &mut rng), make("oh", &mut rng)];
    TemplateSet::new(fps, control_names(controls), list).expect("valid templates")
}
