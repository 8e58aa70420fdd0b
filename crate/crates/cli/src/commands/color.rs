use std::path::PathBuf;

use log::info;
use rigforge_core::color::{
    blend_relit, correct_texture, generate_training_pairs, interior_samples, read_pairs, round_trip_fraction,
    train_corrector, write_pairs, ColorCorrector, ColorTrainConfig, OraclePreset, PairConfig, DEFAULT_BLEND_ALPHA,
    DEFAULT_PAIR_COUNT,
};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::CliError;
use crate::provenance::{read_image, Provenance};
use crate::RunArgs;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OracleSpec {
    Named(String),
    Preset(OraclePreset),
}

impl OracleSpec {
    fn resolve(&self) -> Result<OraclePreset, CliError> {
        match self {
            OracleSpec::Named(n) => Ok(OraclePreset::named(n)?),
            OracleSpec::Preset(p) => Ok(p.clone()),
        }
    }
}

fn default_pair_count() -> usize {
    DEFAULT_PAIR_COUNT
}
fn default_jitter() -> f64 {
    PairConfig::default().jitter
}
fn default_held_out() -> usize {
    1000
}
fn default_tolerance() -> f64 {
    2.0 / 255.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRun {
    /// Synthetic renderer used to generate pairs and score round trips.
    oracle: Option<OracleSpec>,
    /// Captured pair CSV, used instead of generating pairs.
    pairs: Option<PathBuf>,
    #[serde(default = "default_pair_count")]
    pair_count: usize,
    #[serde(default = "default_jitter")]
    jitter: f64,
    #[serde(default = "default_held_out")]
    held_out: usize,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default)]
    training: ColorTrainConfig,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    oracle: Option<&'a str>,
    pair_source: String,
    training_pairs: usize,
    held_out_pairs: usize,
    epochs: usize,
    final_loss: f64,
    validation_error: f64,
    /// Mean absolute channel error of the corrected source on interior colors.
    held_out_error: Option<f64>,
    round_trip_tolerance: f64,
    round_trip_fraction: Option<f64>,
}

pub fn train(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "color train")?;
    cfg.reject_nested_seed("training")?;
    let run: TrainRun = cfg.parse()?;
    let oracle = run.oracle.as_ref().map(OracleSpec::resolve).transpose()?;
    let (pairs, pair_source) = match (&run.pairs, &oracle) {
        (Some(p), _) => {
            let path = cfg.path("pairs", p);
            (read_pairs(&path)?, path.display().to_string())
        }
        (None, Some(o)) => {
            let pairs = generate_training_pairs(
                o,
                run.pair_count,
                &PairConfig {
                    jitter: run.jitter,
                    seed: cfg.seed,
                },
            )?;
            (pairs, format!("oracle:{}", o.name()))
        }
        (None, None) => return Err(CliError::config("either `oracle` or `pairs` is required")),
    };
    let mut training = run.training.clone();
    training.seed = cfg.seed;
    let model = train_corrector(&pairs, &training)?;

    let (held_out_error, fraction) = match &oracle {
        Some(o) if run.held_out > 0 => {
            let held = interior_samples(o, run.held_out, cfg.seed.wrapping_add(1))?;
            let err = held
                .iter()
                .map(|s| {
                    let y = model.correct(s.rendered);
                    (0..3).map(|c| (y[c] - s.source[c]).abs()).sum::<f64>()
                })
                .sum::<f64>()
                / (3 * held.len()) as f64;
            let frac = round_trip_fraction(o, |c| model.correct(c), &held, run.tolerance);
            (Some(err), Some(frac))
        }
        _ => (None, None),
    };
    info!("trained for {} epochs, round trip {:?}", model.metadata.epochs, fraction);

    let out = cfg.create_out()?;
    let prov = Provenance::new("color train", &cfg);
    model.write(&out.join("color_model.json"), Some(prov.json()))?;
    write_pairs(&out.join("pairs.csv"), &pairs, &prov.header_lines())?;
    prov.write_report(
        &out.join("color_report.json"),
        &TrainReport {
            oracle: oracle.as_ref().map(OraclePreset::name),
            pair_source,
            training_pairs: model.metadata.training_pairs,
            held_out_pairs: run.held_out,
            epochs: model.metadata.epochs,
            final_loss: model.metadata.final_loss,
            validation_error: model.metadata.held_out_error,
            held_out_error,
            round_trip_tolerance: run.tolerance,
            round_trip_fraction: fraction,
        },
    )
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectRun {
    model: PathBuf,
    texture: PathBuf,
    /// Weight of the corrected texture against the original.
    #[serde(default = "one")]
    alpha: f64,
}

pub fn correct(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "color correct")?;
    let run: CorrectRun = cfg.parse()?;
    let model = ColorCorrector::read(&cfg.path("model", &run.model))?;
    let texture = read_image(&cfg.path("texture", &run.texture))?;
    let corrected = correct_texture(&model, &texture)?;
    let result = if run.alpha == 1.0 {
        corrected
    } else {
        blend_relit(&texture, &corrected, run.alpha)?
    };
    let out = cfg.create_out()?;
    Provenance::new("color correct", &cfg).write_png(&out.join("corrected.png"), &result)
}

fn default_alpha() -> f64 {
    DEFAULT_BLEND_ALPHA
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlendRun {
    original: PathBuf,
    relit: PathBuf,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

pub fn blend(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "color blend")?;
    let run: BlendRun = cfg.parse()?;
    let original = read_image(&cfg.path("original", &run.original))?;
    let relit = read_image(&cfg.path("relit", &run.relit))?;
    let blended = blend_relit(&original, &relit, run.alpha)?;
    let out = cfg.create_out()?;
    Provenance::new("color blend", &cfg).write_png(&out.join("blended.png"), &blended)
}
