use serde::{Deserialize, Serialize};

use super::{
    laplacian_magnitudes, rigid_align, smooth_transition, transfer_details, Alignment, Correspondence, LandmarkPair,
    Mesh, RegionLabel, RegionMask, SmoothingConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    /// Also fit a uniform scale when aligning the detail mesh.
    pub allow_scale: bool,
    pub smoothing: SmoothingConfig,
}

/// Displacement and seam statistics for one transfer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub landmark_rmse: f64,
    pub scale: f64,
    pub fixed_max_displacement: f64,
    pub replaceable_vertices: usize,
    pub replaceable_max_displacement: f64,
    pub replaceable_mean_displacement: f64,
    pub transition_vertices: usize,
    pub transition_max_displacement: f64,
    /// Largest umbrella-Laplacian magnitude over the transition band,
    /// before and after smoothing.
    pub transition_laplacian_before: f64,
    pub transition_laplacian_after: f64,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub alignment: Alignment,
    pub aligned_detail: Mesh,
    /// After detail transfer, before smoothing.
    pub transferred: Mesh,
    pub result: Mesh,
    pub report: TransferReport,
}

fn max_displacement(a: &Mesh, b: &Mesh, vertices: &[usize]) -> f64 {
    vertices.iter().map(|&v| (a.vertices[v] - b.vertices[v]).norm()).fold(0.0, f64::max)
}

/// Aligns `detail` onto `initial` by the landmark pair, moves the
/// replaceable region onto it and smooths the transition band. Without a
/// `correspondence`, anchors come from nearest-surface projection.
pub fn transfer_pipeline(
    initial: &Mesh,
    detail: &Mesh,
    landmarks: &LandmarkPair,
    mask: &RegionMask,
    correspondence: Option<&Correspondence>,
    config: &TransferConfig,
) -> Result<TransferOutcome> {
    if landmarks.detail.indices.len() != landmarks.initial.indices.len() {
        return Err(Error::Dimension(format!(
            "{} detail landmarks vs {} initial landmarks",
            landmarks.detail.indices.len(),
            landmarks.initial.indices.len()
        )));
    }
    let alignment = rigid_align(
        &landmarks.detail.points(detail)?,
        &landmarks.initial.points(initial)?,
        config.allow_scale,
    )?;
    let aligned_detail = detail.with_vertices(alignment.transform.apply_all(&detail.vertices))?;
    let replaceable = mask.indices_of(RegionLabel::Replaceable);
    let projected;
    let correspondence = match correspondence {
        Some(c) => c,
        None => {
            projected = Correspondence::project(initial, &aligned_detail, &replaceable)?;
            &projected
        }
    };
    let transferred = transfer_details(initial, &aligned_detail, mask, correspondence)?;
    let result = smooth_transition(&transferred, mask, &config.smoothing)?;

    let fixed = mask.indices_of(RegionLabel::Fixed);
    let band = mask.indices_of(RegionLabel::Transition);
    let peak = |m: &Mesh| laplacian_magnitudes(m, &band).into_iter().fold(0.0, f64::max);
    let moved: Vec<f64> = replaceable.iter().map(|&v| (result.vertices[v] - initial.vertices[v]).norm()).collect();
    let report = TransferReport {
        landmark_rmse: alignment.rmse,
        scale: alignment.transform.scale,
        fixed_max_displacement: max_displacement(initial, &result, &fixed),
        replaceable_vertices: replaceable.len(),
        replaceable_max_displacement: moved.iter().copied().fold(0.0, f64::max),
        replaceable_mean_displacement: if moved.is_empty() { 0.0 } else { moved.iter().sum::<f64>() / moved.len() as f64 },
        transition_vertices: band.len(),
        transition_max_displacement: max_displacement(&transferred, &result, &band),
        transition_laplacian_before: peak(&transferred),
        transition_laplacian_after: peak(&result),
    };
    Ok(TransferOutcome {
        alignment,
        aligned_detail,
        transferred,
        result,
        report,
    })
}
