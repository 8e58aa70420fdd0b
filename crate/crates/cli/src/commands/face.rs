use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use rigforge_core::face::{
    apply_interjections, drive_face, evaluate, read_events, train_face_model, AudioFeatureTrack, Body,
    FaceEvaluation, FaceRegressor, FaceTrainConfig, FaceTrainingMetadata, RigCoefficientTrack, SkippedEvent,
    TemplateSet,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, Loaded};
use crate::error::CliError;
use crate::provenance::Provenance;
use crate::RunArgs;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRun {
    features: Vec<PathBuf>,
    targets: Vec<PathBuf>,
    #[serde(default)]
    held_out_features: Vec<PathBuf>,
    #[serde(default)]
    held_out_targets: Vec<PathBuf>,
    /// Held-out per-entry reconstruction error the run is expected to beat.
    threshold: Option<f64>,
    #[serde(default)]
    training: FaceTrainConfig,
}

#[derive(Serialize)]
struct TrainReport {
    training: FaceTrainingMetadata,
    held_out: Option<FaceEvaluation>,
    threshold: Option<f64>,
    passed: Option<bool>,
}

fn read_pairs(
    cfg: &Loaded,
    key: (&str, &str),
    features: &[PathBuf],
    targets: &[PathBuf],
) -> Result<(Vec<AudioFeatureTrack>, Vec<RigCoefficientTrack>), CliError> {
    if features.len() != targets.len() {
        return Err(CliError::config(format!(
            "{} `{}` files but {} `{}` files",
            features.len(),
            key.0,
            targets.len(),
            key.1
        )));
    }
    let f = features
        .iter()
        .map(|p| AudioFeatureTrack::read(&cfg.path(key.0, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let t = targets
        .iter()
        .map(|p| RigCoefficientTrack::read(&cfg.path(key.1, p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((f, t))
}

pub fn train(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "face train")?;
    cfg.reject_nested_seed("training")?;
    let run: TrainRun = cfg.parse()?;
    let (features, targets) = read_pairs(&cfg, ("features", "targets"), &run.features, &run.targets)?;
    let mut training = run.training.clone();
    training.seed = cfg.seed;
    let model = train_face_model(&features, &targets, &training)?;
    info!(
        "trained for {} epochs, validation L_rec {:.3e}",
        model.metadata.epochs, model.metadata.held_out_rec
    );

    let held_out = if run.held_out_features.is_empty() && run.held_out_targets.is_empty() {
        None
    } else {
        let (f, t) = read_pairs(
            &cfg,
            ("held_out_features", "held_out_targets"),
            &run.held_out_features,
            &run.held_out_targets,
        )?;
        Some(evaluate(&model, &f, &t)?)
    };
    let passed = match (run.threshold, &held_out) {
        (Some(th), Some(e)) => Some(e.rec_per_entry < th),
        (Some(th), None) => Some(model.metadata.held_out_rec < th),
        _ => None,
    };
    if passed == Some(false) {
        warn!("held-out reconstruction error is above the threshold");
    }

    let out = cfg.create_out()?;
    let prov = Provenance::new("face train", &cfg);
    model.write(&out.join("face_model.json"), Some(prov.json()))?;
    prov.write_report(
        &out.join("face_report.json"),
        &TrainReport {
            training: model.metadata.clone(),
            held_out,
            threshold: run.threshold,
            passed,
        },
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriveRun {
    model: PathBuf,
    features: PathBuf,
    /// JSON list of `[token, seconds]` pairs.
    events: Option<PathBuf>,
    templates: Option<PathBuf>,
}

#[derive(Serialize)]
struct DriveReport {
    fps: f64,
    frames: usize,
    controls: usize,
    events: usize,
    applied: usize,
    skipped: Vec<SkippedEvent>,
}

pub fn drive(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "face drive")?;
    let run: DriveRun = cfg.parse()?;
    let model = FaceRegressor::read(&cfg.path("model", &run.model))?;
    let features = AudioFeatureTrack::read(&cfg.path("features", &run.features))?;
    let mut track = drive_face(&model, &features)?;

    let events = match &run.events {
        Some(p) => read_events(&cfg.path("events", p))?,
        None => Vec::new(),
    };
    let mut skipped = Vec::new();
    match &run.templates {
        Some(p) => {
            let set = TemplateSet::read(&cfg.path("templates", p))?;
            let (spliced, s) = apply_interjections(&track, &events, &set)?;
            track = spliced;
            skipped = s;
        }
        None if !events.is_empty() => return Err(CliError::config("`events` requires `templates`")),
        None => {}
    }

    let out = cfg.create_out()?;
    let prov = Provenance::new("face drive", &cfg);
    track.write(&out.join("coefficients.json"), Body::Inline, Some(prov.json()))?;
    let mut csv = track.controls.join(",");
    csv.push('\n');
    for row in &track.values {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(csv, "{}", line.join(",")).unwrap();
    }
    prov.write_text(&out.join("coefficients.csv"), &csv)?;
    prov.write_report(
        &out.join("drive_report.json"),
        &DriveReport {
            fps: track.fps,
            frames: track.frame_count(),
            controls: track.control_count(),
            events: events.len(),
            applied: events.len() - skipped.len(),
            skipped,
        },
    )
}
