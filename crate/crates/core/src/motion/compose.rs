use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clip::Category;
use super::graph::MotionGraph;
use super::track::{MotionTrack, TrackClip};
use super::viterbi::{viterbi_path, EmbeddingMetric, ViterbiResult};
use crate::{schema, Error, Result};

/// Concatenates the frames of `path` (clip ids). Where a pose clip is
/// followed by a pose clip of another category, a transition clip for that
/// category pair is picked at random (seeded) and inserted. Every other
/// junction must be a graph edge.
pub fn compose_track(graph: &MotionGraph, path: &[usize], seed: u64) -> Result<MotionTrack> {
    if path.is_empty() {
        return Err(Error::Composition("empty clip path".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |id: usize| graph.node_of(id).ok_or_else(|| Error::Composition(format!("unknown clip {id}")));
    let mut sequence: Vec<(usize, bool)> = Vec::with_capacity(path.len());
    for (k, &id) in path.iter().enumerate() {
        let v = node(id)?;
        if let Some(&(u, _)) = sequence.last() {
            let (cu, cv) = (graph.clips()[u].category, graph.clips()[v].category);
            match (cu, cv) {
                (Category::Pose(a), Category::Pose(b)) if a != b => {
                    let options = graph.transitions(a, b);
                    if options.is_empty() {
                        return Err(Error::Composition(format!(
                            "no transition clip from pose {a} to pose {b} (before path step {k})"
                        )));
                    }
                    sequence.push((options[rng.random_range(0..options.len())], true));
                }
                _ if graph.edge(u, v).is_none() => {
                    return Err(Error::Composition(format!(
                        "clips {} and {id} at path step {k} are not connected",
                        graph.clips()[u].id
                    )));
                }
                _ => {}
            }
        }
        sequence.push((v, false));
    }

    let mut frames = Vec::new();
    let mut clips = Vec::with_capacity(sequence.len());
    for (v, inserted) in sequence {
        let clip = &graph.clips()[v];
        clips.push(TrackClip {
            clip: clip.id,
            category: clip.category,
            start_frame: frames.len(),
            frame_count: clip.frames.len(),
            inserted,
        });
        frames.extend(clip.frames.iter().cloned());
    }
    Ok(MotionTrack {
        schema: schema::MOTION_TRACK.into(),
        provenance: None,
        fps: graph.fps,
        joints: graph.joints.clone(),
        clips,
        frames,
    })
}

/// A run of consecutive audio windows performed in one pose category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub category: u8,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    /// Viterbi result per segment, in order.
    pub segments: Vec<ViterbiResult>,
    /// Sum of the segment totals. Inserted transition clips carry no cost.
    pub total: f64,
    pub track: MotionTrack,
}

/// Splits `audio` into `segments`, runs Viterbi inside each segment's pose
/// category and composes the concatenated path.
pub fn compose_segments(
    graph: &MotionGraph,
    audio: &[Vec<f64>],
    segments: &[Segment],
    metric: EmbeddingMetric,
    seed: u64,
) -> Result<SegmentPlan> {
    let steps: usize = segments.iter().map(|s| s.steps).sum();
    if steps != audio.len() || segments.iter().any(|s| s.steps == 0) {
        return Err(Error::Invalid(format!(
            "segments cover {steps} steps (each must be ≥ 1) but the audio has {}",
            audio.len()
        )));
    }
    let mut results = Vec::with_capacity(segments.len());
    let mut path = Vec::with_capacity(audio.len());
    let mut offset = 0;
    for seg in segments {
        let r = viterbi_path(graph, &audio[offset..offset + seg.steps], Some(seg.category), metric).map_err(|e| match e {
            Error::Infeasible { step, reason } => Error::Infeasible {
                step: offset + step,
                reason,
            },
            other => other,
        })?;
        path.extend_from_slice(&r.clips);
        offset += seg.steps;
        results.push(r);
    }
    let total = results.iter().map(|r| r.total).sum();
    let track = compose_track(graph, &path, seed)?;
    Ok(SegmentPlan {
        segments: results,
        total,
        track,
    })
}
