use std::path::PathBuf;

use log::info;
use rigforge_core::mesh::{read_obj, transfer_pipeline, write_obj, Correspondence, LandmarkPair, RegionMask, SmoothingConfig, TransferConfig};
use rigforge_core::schema;
use serde::Deserialize;

use crate::config;
use crate::error::CliError;
use crate::provenance::Provenance;
use crate::RunArgs;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransferRun {
    initial: PathBuf,
    detail: PathBuf,
    landmarks: PathBuf,
    mask: PathBuf,
    correspondence: Option<PathBuf>,
    #[serde(default)]
    allow_scale: bool,
    #[serde(default)]
    smoothing: SmoothingConfig,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "transfer")?;
    let run: TransferRun = cfg.parse()?;
    let initial = read_obj(&cfg.path("initial", &run.initial))?;
    let detail = read_obj(&cfg.path("detail", &run.detail))?;
    let landmarks: LandmarkPair = schema::read_json(&cfg.path("landmarks", &run.landmarks), schema::LANDMARKS)?;
    let mask = RegionMask::read(&cfg.path("mask", &run.mask), &initial)?;
    let correspondence = run
        .correspondence
        .as_ref()
        .map(|p| Correspondence::read(&cfg.path("correspondence", p)))
        .transpose()?;
    let outcome = transfer_pipeline(
        &initial,
        &detail,
        &landmarks,
        &mask,
        correspondence.as_ref(),
        &TransferConfig {
            allow_scale: run.allow_scale,
            smoothing: run.smoothing,
        },
    )?;

    let out = cfg.create_out()?;
    let prov = Provenance::new("transfer", &cfg);
    write_obj(&out.join("result.obj"), &outcome.result, &prov.header_lines())?;
    prov.write_report(&out.join("transfer_report.json"), &outcome.report)?;
    info!(
        "landmark rmse {:.3e}, fixed max displacement {:.3e}",
        outcome.report.landmark_rmse, outcome.report.fixed_max_displacement
    );
    Ok(())
}
