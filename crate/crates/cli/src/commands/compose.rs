use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;
use rigforge_core::motion::{
    compose_segments, compose_track, viterbi_path, AudioEmbeddingSequence, ClipLibrary, EmbeddingMetric, MotionGraph,
    PoseTolerance, Segment, StepCost, ViterbiStats,
};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::CliError;
use crate::provenance::Provenance;
use crate::RunArgs;

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposeRun {
    library: PathBuf,
    /// CSV rows, or a JSON header pointing at a raw f32 body.
    embeddings: PathBuf,
    #[serde(default = "one")]
    lambda1: f64,
    #[serde(default = "one")]
    lambda2: f64,
    #[serde(default)]
    metric: EmbeddingMetric,
    /// Restrict the whole path to one pose category.
    category: Option<u8>,
    /// Consecutive category runs covering the audio; overrides `category`.
    segments: Option<Vec<Segment>>,
    /// Lint the library's canonical poses before building the graph.
    #[serde(default = "yes")]
    validate: bool,
    #[serde(default)]
    pose_tolerance: PoseTolerance,
}

#[derive(Serialize)]
struct CostReport {
    total: f64,
    emission_total: f64,
    transition_total: f64,
    steps: Vec<StepCost>,
    relaxations: usize,
    track_frames: usize,
    track_seconds: f64,
    inserted_transitions: usize,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(args, "compose")?;
    let run: ComposeRun = cfg.parse()?;
    let library = ClipLibrary::read(&cfg.path("library", &run.library))?;
    if run.validate {
        library.validate(&run.pose_tolerance)?;
    }
    let audio = AudioEmbeddingSequence::read(&cfg.path("embeddings", &run.embeddings))?;
    let graph = MotionGraph::from_library(&library, run.lambda1, run.lambda2)?;

    let (total, steps, stats, mut track) = match &run.segments {
        Some(segments) => {
            let plan = compose_segments(&graph, &audio.rows, segments, run.metric, cfg.seed)?;
            let mut steps = Vec::with_capacity(audio.len());
            let mut stats = ViterbiStats::default();
            for r in &plan.segments {
                let offset = steps.len();
                steps.extend(r.steps.iter().map(|s| StepCost {
                    step: s.step + offset,
                    ..*s
                }));
                stats.steps += r.stats.steps;
                stats.relaxations += r.stats.relaxations;
            }
            (plan.total, steps, stats, plan.track)
        }
        None => {
            let r = viterbi_path(&graph, &audio.rows, run.category, run.metric)?;
            let track = compose_track(&graph, &r.clips, cfg.seed)?;
            (r.total, r.steps, r.stats, track)
        }
    };
    info!("path cost {total:.6} over {} steps", steps.len());

    let out = cfg.create_out()?;
    let prov = Provenance::new("compose", &cfg);
    track.provenance = Some(prov.json());
    track.write(&out.join("track.json"))?;
    track.write_bvh(&out.join("track.bvh"), &prov.header_lines())?;

    let mut csv = String::from("step,clip,emission,transition\n");
    for s in &steps {
        writeln!(csv, "{},{},{},{}", s.step, s.clip, s.emission, s.transition).unwrap();
    }
    prov.write_text(&out.join("costs.csv"), &csv)?;
    prov.write_report(
        &out.join("costs.json"),
        &CostReport {
            total,
            emission_total: steps.iter().map(|s| s.emission).sum(),
            transition_total: steps.iter().map(|s| s.transition).sum(),
            relaxations: stats.relaxations,
            track_frames: track.frames.len(),
            track_seconds: track.duration(),
            inserted_transitions: track.clips.iter().filter(|c| c.inserted).count(),
            steps,
        },
    )
}
