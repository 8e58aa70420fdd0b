//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criteria 9 and 10 drive the `rigforge` binary over the
//! shipped fixture pack.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::UnitQuaternion;
use rigforge_core::color::ColorCorrector;
use rigforge_core::face::{drive_face, rec_loss, vel_loss, AudioFeatureTrack, FaceRegressor};
use rigforge_core::mesh::synth::{bump_fixture, disk_indices, grid};
use rigforge_core::mesh::{apply_shape_basis, transfer_pipeline, RegionLabel, ShapeBasisSet, TransferConfig, DEFAULT_BASIS_COUNT};
use rigforge_core::motion::synth::random_graph;
use rigforge_core::motion::{brute_force_path, viterbi_path, EmbeddingMetric};
use rigforge_core::skeleton::synth::{face_rig, perturb_leaves, random_rig};
use rigforge_core::skeleton::{
    calibrate_skeleton, forward_kinematics, lbs_deform, total_loss, total_loss_gradient, CalibrationConfig,
    CalibrationInput, SkeletonRig,
};
use rigforge_core::Vec3;
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn rigforge(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rigforge"))
        .args(args)
        .env("RIGFORGE_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("rigforge {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn viterbi_optimality() -> Outcome {
    let mut elapsed = Duration::ZERO;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let nodes = 2 + (seed % 5) as usize;
        let steps = 1 + (seed % 5) as usize;
        let (graph, audio) = random_graph(nodes, steps, 8, 1000 + seed);
        let start = Instant::now();
        let fast = viterbi_path(&graph, &audio, None, EmbeddingMetric::SquaredEuclidean);
        elapsed += start.elapsed();
        match (fast, brute_force_path(&graph, &audio, None, EmbeddingMetric::SquaredEuclidean).unwrap()) {
            (Ok(r), Some((_, best))) => worst = worst.max((r.total - best).abs()),
            (Err(_), None) => {}
            (a, b) => return Err(format!("seed {seed}: viterbi {:?} vs exhaustive {:?}", a.map(|r| r.total), b)),
        }
    }
    check(
        worst < 1e-9 && elapsed < Duration::from_secs(1),
        format!("50 graphs, max |delta| {worst:.1e}, viterbi time {:.1} ms", elapsed.as_secs_f64() * 1e3),
    )
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let mut worst_ratio = 0.0f64;
    let mut worst_err = 0.0f64;
    let fx = face_rig(21);
    if fx.rig.len() < 10 || fx.rig.leaves().len() < 5 || fx.neutral.vertex_count() < 500 {
        return Err("fixture rig is smaller than required".into());
    }
    for seed in 0..3u64 {
        let (truth, _) = perturb_leaves(&fx.rig, 5, 0.05, 40 + seed);
        let target = fx
            .neutral
            .with_vertices(lbs_deform(&fx.neutral.vertices, &fx.binding, &forward_kinematics(&truth)).unwrap())
            .unwrap();
        let r = calibrate_skeleton(
            &CalibrationInput {
                rig: &fx.rig,
                binding: &fx.binding,
                neutral: &fx.neutral,
                target: &target,
                overlap: &fx.overlap,
                residual_mask: None,
            },
            &CalibrationConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        worst_ratio = worst_ratio.max(r.final_losses.vertex / r.initial.vertex);
        for j in fx.rig.leaves() {
            worst_err = worst_err.max((r.rig.joints()[j].translation - truth.joints()[j].translation).norm());
        }
    }
    let t = start.elapsed();
    check(
        worst_ratio < 1e-6 && worst_err < 1e-3 && t < Duration::from_secs(30),
        format!(
            "{} joints, {} leaves, {} vertices; L_v ratio {worst_ratio:.1e}, leaf error {worst_err:.1e}, {:.2} s for 3 fits",
            fx.rig.len(),
            fx.rig.leaves().len(),
            fx.neutral.vertex_count(),
            t.as_secs_f64()
        ),
    )
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..10 {
        let (s, target) = random_rig(seed, 7, 60);
        let base = &s.neutral.vertices;
        let loss = |rig: &SkeletonRig| total_loss(rig, &s.binding, base, &target, &s.overlap).unwrap().total();
        let (_, grads) = total_loss_gradient(&s.rig, &s.binding, base, &target, &s.overlap).unwrap();
        for j in 0..s.rig.len() {
            let joint = s.rig.joints()[j].clone();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = H;
                let (mut tp, mut tm, mut rp, mut rm) = (s.rig.clone(), s.rig.clone(), s.rig.clone(), s.rig.clone());
                tp.set_local(j, joint.translation + e, joint.rotation);
                tm.set_local(j, joint.translation - e, joint.rotation);
                rp.set_local(j, joint.translation, UnitQuaternion::from_scaled_axis(e) * joint.rotation);
                rm.set_local(j, joint.translation, UnitQuaternion::from_scaled_axis(-e) * joint.rotation);
                for (an, fd) in [
                    (grads[j].translation[k], (loss(&tp) - loss(&tm)) / (2.0 * H)),
                    (grads[j].rotation[k], (loss(&rp) - loss(&rm)) / (2.0 * H)),
                ] {
                    worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-6));
                    count += 1;
                }
            }
        }
    }
    check(worst < 1e-4, format!("{count} parameters on 10 rigs, max relative error {worst:.1e}"))
}

fn color_round_trip(out: &Path, train_time: Duration) -> Outcome {
    let report = json(&out.join("color_report.json"))?;
    let model = ColorCorrector::read(&out.join("color_model.json")).map_err(|e| e.to_string())?;
    let frac = report["round_trip_fraction"].as_f64().unwrap_or(0.0);
    let held = report["held_out_pairs"].as_u64().unwrap_or(0);
    let pairs = report["training_pairs"].as_u64().unwrap_or(0) as f64 / 0.9;
    let sizes = model.mlp.sizes().to_vec();
    check(
        sizes == [3, 32, 32, 3] && pairs.round() >= 10_000.0 && held >= 1000 && frac >= 0.95 && train_time < Duration::from_secs(120),
        format!(
            "layers {sizes:?}, {} pairs, {frac:.3} of {held} held-out colors within 2/255, trained in {:.1} s",
            pairs.round(),
            train_time.as_secs_f64()
        ),
    )
}

fn transfer_safety() -> Outcome {
    let fx = bump_fixture(7);
    let outcome = transfer_pipeline(&fx.initial, &fx.detail, &fx.landmarks, &fx.mask, None, &TransferConfig::default())
        .map_err(|e| e.to_string())?;
    let fixed = fx.mask.indices_of(RegionLabel::Fixed);
    let identical = fixed.iter().all(|&v| {
        let (a, b) = (outcome.result.vertices[v], fx.initial.vertices[v]);
        (0..3).all(|k| a[k].to_bits() == b[k].to_bits())
    });
    let r = &outcome.report;
    let drop = 1.0 - r.transition_laplacian_after / r.transition_laplacian_before;
    check(
        identical && drop >= 0.5,
        format!(
            "{} fixed vertices bit-identical: {identical}; seam Laplacian {:.2e} -> {:.2e} ({:.0}% lower)",
            fixed.len(),
            r.transition_laplacian_before,
            r.transition_laplacian_after,
            100.0 * drop
        ),
    )
}

fn shape_basis() -> Outcome {
    let mesh = grid(15, 15, 0.01);
    let region = disk_indices(&mesh, 0.05);
    let base = region.iter().map(|&i| mesh.vertices[i] + Vec3::new(0.0, 0.0, 0.013)).collect();
    let set = ShapeBasisSet::synthetic(region, base, DEFAULT_BASIS_COUNT, 3);
    let eval = |alpha: &[f64]| {
        let mut s = set.clone();
        s.coefficients = alpha.to_vec();
        apply_shape_basis(&s).unwrap()
    };
    let zero = eval(&[0.0; DEFAULT_BASIS_COUNT]);
    let exact = zero.iter().zip(&set.base).all(|(p, b)| [p.x, p.y, p.z] == *b);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let a: Vec<f64> = (0..DEFAULT_BASIS_COUNT).map(|i| ((k * 31 + i * 17) % 13) as f64 / 2.0 - 3.0).collect();
        let b: Vec<f64> = (0..DEFAULT_BASIS_COUNT).map(|i| ((k * 7 + i * 29) % 11) as f64 / 3.0 - 1.5).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (va, vb, vab) = (eval(&a), eval(&b), eval(&ab));
        for v in 0..zero.len() {
            worst = worst.max(((vab[v] - zero[v]) - (va[v] - zero[v]) - (vb[v] - zero[v])).norm());
        }
    }
    check(exact && worst < 1e-12, format!("zero coefficients exact: {exact}; max linearity residual {worst:.1e}"))
}

fn loss_identities() -> Outcome {
    let truth = vec![vec![0.2, 0.4]; 3];
    let shifted: Vec<Vec<f64>> = truth.iter().map(|r| r.iter().map(|x| x + 0.1).collect()).collect();
    let alternating: Vec<Vec<f64>> = (0..5).map(|t| vec![0.5 + if t % 2 == 0 { 0.1 } else { -0.1 }]).collect();
    let cases = [
        ("rec single entry", rec_loss(&[vec![0.5]], &[vec![0.0]]).unwrap(), 0.25),
        ("rec uniform offset", rec_loss(&shifted, &truth).unwrap(), 0.06),
        ("vel uniform offset", vel_loss(&shifted, &truth).unwrap(), 0.0),
        ("vel single frame", vel_loss(&[vec![0.3]], &[vec![0.9]]).unwrap(), 0.0),
        ("vel alternating", vel_loss(&alternating, &vec![vec![0.5]; 5]).unwrap(), 4.0 * 0.04),
    ];
    let bad: Vec<&str> = cases.iter().filter(|(_, got, want)| (got - want).abs() > 1e-15).map(|c| c.0).collect();
    check(bad.is_empty(), format!("{} micro-cases, mismatches: {bad:?}", cases.len()))
}

fn face_convergence(out: &Path, train_time: Duration) -> Outcome {
    let report = json(&out.join("face_report.json"))?;
    let rec = report["held_out"]["rec_per_entry"].as_f64().unwrap_or(f64::INFINITY);
    let model = FaceRegressor::read(&out.join("face_model.json")).map_err(|e| e.to_string())?;
    let features = AudioFeatureTrack::read(&fixtures().join("face/held_features_0.json")).map_err(|e| e.to_string())?;
    let base: Vec<Vec<f64>> = features.frames[..48].to_vec();
    let drive = |f: Vec<Vec<f64>>| drive_face(&model, &AudioFeatureTrack::new(features.fps, f).unwrap()).unwrap();
    let reference = drive(base.clone());
    let mut leaks = 0;
    for s in 0..base.len() {
        let mut probe = base.clone();
        probe[s].iter_mut().for_each(|x| *x += 3.0);
        let moved = drive(probe);
        leaks += (0..base.len()).filter(|t| t.abs_diff(s) > model.window && moved.values[*t] != reference.values[*t]).count();
    }
    check(
        rec < 1e-4 && leaks == 0 && train_time < Duration::from_secs(300),
        format!(
            "held-out L_rec per entry {rec:.2e}, trained in {:.1} s; {leaks} out-of-window changes over {} probes",
            train_time.as_secs_f64(),
            base.len()
        ),
    )
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(work: &Path) -> Outcome {
    let fx = fixtures();
    let f = |rel: &str| fx.join(rel).display().to_string();
    let color_model = work.join("det-color-train-0/color_model.json").display().to_string();
    let face_model = work.join("det-face-train-0/face_model.json").display().to_string();
    // Training runs use shortened schedules; the comparison is about
    // repeatability, not model quality.
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("transfer", vec!["transfer".into(), "--config".into(), f("transfer/bump/config.toml")]),
        ("calibrate", vec!["calibrate".into(), "--config".into(), f("calibrate/leaves/config.toml")]),
        (
            "color-train",
            vec!["color", "train", "--config", &f("color/train.toml"), "--set", "pair_count=2000", "--set", "training.max_epochs=40"]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        (
            "color-correct",
            vec!["color", "correct", "--config", &f("color/correct.toml"), "--set", &format!("model={color_model}")]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        ("color-blend", vec!["color".into(), "blend".into(), "--config".into(), f("color/blend.toml")]),
        ("compose", vec!["compose".into(), "--config".into(), f("compose/library/config.toml"), "--seed".into(), "5".into()]),
        ("compose-4", vec!["compose".into(), "--config".into(), f("compose/four-node/config.toml")]),
        (
            "face-train",
            vec!["face", "train", "--config", &f("face/train.toml"), "--set", "training.max_epochs=4"]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        (
            "face-drive",
            vec!["face", "drive", "--config", &f("face/drive.toml"), "--set", &format!("model={face_model}")]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
    ];
    let mut compared = 0;
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for k in 0..3 {
            let out = work.join(format!("det-{name}-{k}"));
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            let out_s = out.display().to_string();
            a.extend(["--out", &out_s]);
            rigforge(&a)?;
            outputs.push(files(&out));
        }
        if outputs[0].is_empty() || outputs[1..].iter().any(|o| *o != outputs[0]) {
            return Err(format!("`{name}` outputs differ between runs"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{} commands x 3 runs, {compared} output files byte-identical", runs.len()))
}

struct Pipeline {
    total: Duration,
    color_train: Duration,
    face_train: Duration,
    out: PathBuf,
}

fn pipeline(work: &Path) -> Result<Pipeline, String> {
    let fx = fixtures();
    let out = work.join("pipeline");
    let p = |rel: &str| fx.join(rel).display().to_string();
    let o = |rel: &str| out.join(rel).display().to_string();
    let start = Instant::now();
    rigforge(&["transfer", "--config", &p("transfer/bump/config.toml"), "--out", &o("transfer")])?;
    rigforge(&["calibrate", "--config", &p("calibrate/leaves/config.toml"), "--out", &o("calibrate")])?;
    let t = Instant::now();
    rigforge(&["color", "train", "--config", &p("color/train.toml"), "--out", &o("color")])?;
    let color_train = t.elapsed();
    let model = format!("model={}", o("color/color_model.json"));
    rigforge(&["color", "correct", "--config", &p("color/correct.toml"), "--set", &model, "--out", &o("color")])?;
    rigforge(&["compose", "--config", &p("compose/library/config.toml"), "--out", &o("compose")])?;
    let t = Instant::now();
    rigforge(&["face", "train", "--config", &p("face/train.toml"), "--out", &o("face")])?;
    let face_train = t.elapsed();
    let model = format!("model={}", o("face/face_model.json"));
    rigforge(&["face", "drive", "--config", &p("face/drive.toml"), "--set", &model, "--out", &o("face")])?;
    Ok(Pipeline {
        total: start.elapsed(),
        color_train,
        face_train,
        out,
    })
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let pipe = pipeline(work.path());
    let from_pipe = |f: &dyn Fn(&Pipeline) -> Outcome| match &pipe {
        Ok(p) => f(p),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("viterbi optimality", viterbi_optimality()),
        ("skeleton calibration recovery", calibration_recovery()),
        ("gradient correctness", gradient_check()),
        ("color round trip", from_pipe(&|p| color_round_trip(&p.out.join("color"), p.color_train))),
        ("detail-transfer safety", transfer_safety()),
        ("shape-basis exactness", shape_basis()),
        ("loss identities", loss_identities()),
        ("face-model convergence", from_pipe(&|p| face_convergence(&p.out.join("face"), p.face_train))),
        ("determinism sweep", determinism(work.path())),
        (
            "end-to-end wall clock",
            from_pipe(&|p| check(p.total < Duration::from_secs(600), format!("full fixture pipeline in {:.1} s", p.total.as_secs_f64()))),
        ),
    ];
    let mut failed = 0;
    for (k, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
