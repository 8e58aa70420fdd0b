use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use rigforge_core::mesh::{read_obj, write_obj, Mesh};
use rigforge_core::Vec3;
use rigforge_core::skeleton::{calibrate_skeleton, CalibrationConfig, CalibrationDocument, CalibrationInput, RigDocument};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::CliError;
use crate::provenance::Provenance;
use crate::RunArgs;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateRun {
    rig: PathBuf,
    neutral: PathBuf,
    target: PathBuf,
    /// Rig with known leaf locals; when given, the report lists recovery errors.
    reference: Option<PathBuf>,
    #[serde(default)]
    optimizer: CalibrationConfig,
}

#[derive(Serialize)]
struct LeafError {
    joint: String,
    translation_error: f64,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "calibrate")?;
    let run: CalibrateRun = cfg.parse()?;
    let neutral = read_obj(&cfg.path("neutral", &run.neutral))?;
    let target = read_obj(&cfg.path("target", &run.target))?;
    let (rig, binding, overlap) = RigDocument::read(&cfg.path("rig", &run.rig))?.into_parts(&neutral.vertices)?;
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &rig,
            binding: &binding,
            neutral: &neutral,
            target: &target,
            overlap: &overlap,
            residual_mask: None,
        },
        &run.optimizer,
    )?;
    if !result.converged {
        warn!("calibration stopped after {} iterations without converging", result.iterations);
    }
    info!(
        "L_v {:.3e} -> {:.3e} in {} iterations",
        result.initial.vertex, result.final_losses.vertex, result.iterations
    );

    let leaf_errors = match &run.reference {
        Some(p) => {
            let reference = RigDocument::read(&cfg.path("reference", p))?;
            let errors = rig
                .leaves()
                .into_iter()
                .map(|j| {
                    let joint = &result.rig.joints()[j];
                    let truth = reference.joints.iter().find(|r| r.name == joint.name).ok_or_else(|| {
                        CliError::config(format!("reference rig has no joint `{}`", joint.name))
                    })?;
                    Ok(LeafError {
                        joint: joint.name.clone(),
                        translation_error: (joint.translation - Vec3::from(truth.translation)).norm(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Some(errors)
        }
        None => None,
    };

    let out = cfg.create_out()?;
    let prov = Provenance::new("calibrate", &cfg);
    let mut doc = CalibrationDocument::new(&result);
    doc.provenance = Some(prov.json());
    let mut value = serde_json::to_value(&doc).expect("calibration document serializes");
    if let Some(errors) = leaf_errors {
        value["leaf_errors"] = serde_json::to_value(errors).expect("plain records");
    }
    rigforge_core::schema::write_json(&out.join("calibration.json"), &value)?;

    let mut csv = String::from("stage,iteration,vertex,overlap,total\n");
    for t in &result.trace {
        writeln!(csv, "{},{},{:e},{:e},{:e}", t.stage, t.iteration, t.vertex, t.overlap, t.total).unwrap();
    }
    prov.write_text(&out.join("trace.csv"), &csv)?;

    let blended = Mesh::new(result.blended_neutral(&neutral.vertices), neutral.faces.clone())?;
    write_obj(&out.join("calibrated_neutral.obj"), &blended, &prov.header_lines())?;
    Ok(())
}
