use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigforge"))
        .args(args)
        .env("RIGFORGE_LOG", "off")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Exit code and the parsed JSON error line.
fn fail(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with('{')).expect("json error line");
    (out.status.code().unwrap(), serde_json::from_str(line).unwrap())
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn body(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn identity_transfer_reproduces_the_input() {
    let d = tmp();
    let out = d.path().display().to_string();
    ok(&["transfer", "--config", &fx("transfer/identity/config.toml"), "--out", &out]);
    assert_eq!(body(&d.path().join("result.obj")), body(&fixtures().join("transfer/identity/initial.obj")));
    let report = read_json(&d.path().join("transfer_report.json"));
    assert_eq!(report["fixed_max_displacement"], 0.0);
}

#[test]
fn bump_transfer_keeps_fixed_region() {
    let d = tmp();
    ok(&["transfer", "--config", &fx("transfer/bump/config.toml"), "--out", &d.path().display().to_string()]);
    let report = read_json(&d.path().join("transfer_report.json"));
    assert_eq!(report["fixed_max_displacement"], 0.0);
    assert_eq!(report["provenance"]["command"], "transfer");
    let obj = std::fs::read_to_string(d.path().join("result.obj")).unwrap();
    assert!(obj.starts_with("# rigforge "));
    assert!(obj.contains("# config sha256 "));
}

#[test]
fn missing_mask_exits_2_naming_the_path() {
    let d = tmp();
    let (code, err) = fail(&[
        "transfer",
        "--config",
        &fx("transfer/bump/config.toml"),
        "--set",
        "mask=/no/such/mask.json",
        "--out",
        &d.path().display().to_string(),
    ]);
    assert_eq!(code, 2);
    assert_eq!(err["error"]["path"], "/no/such/mask.json");
    assert_eq!(err["error"]["exit_code"], 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let (code, err) = fail(&["transfer", "--config", &fx("transfer/bump/config.toml"), "--set", "smoothing.lamda=0.4"]);
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn calibration_recovers_leaves_and_identity_exits_early() {
    let d = tmp();
    let out = d.path().join("leaves");
    ok(&["calibrate", "--config", &fx("calibrate/leaves/config.toml"), "--out", &out.display().to_string()]);
    let doc = read_json(&out.join("calibration.json"));
    let initial = doc["losses"]["initial"]["vertex"].as_f64().unwrap();
    let last = doc["losses"]["final"]["vertex"].as_f64().unwrap();
    assert!(last < 1e-6 * initial);
    for e in doc["leaf_errors"].as_array().unwrap() {
        assert!(e["translation_error"].as_f64().unwrap() < 1e-3);
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().filter(|l| !l.starts_with('#')).count() > 2);

    let out = d.path().join("identity");
    ok(&["calibrate", "--config", &fx("calibrate/identity/config.toml"), "--out", &out.display().to_string()]);
    let doc = read_json(&out.join("calibration.json"));
    assert_eq!(doc["iterations"], 0);
    assert_eq!(doc["converged"], true);
}

#[test]
fn non_converged_calibration_still_succeeds() {
    let d = tmp();
    let out = d.path().display().to_string();
    ok(&[
        "calibrate",
        "--config",
        &fx("calibrate/leaves/config.toml"),
        "--set",
        "optimizer.max_iterations=2",
        "--out",
        &out,
    ]);
    assert_eq!(read_json(&d.path().join("calibration.json"))["converged"], false);
}

#[test]
fn four_node_compose_matches_shipped_oracle() {
    let d = tmp();
    ok(&["compose", "--config", &fx("compose/four-node/config.toml"), "--out", &d.path().display().to_string()]);
    let costs = read_json(&d.path().join("costs.json"));
    let expected = read_json(&fixtures().join("compose/four-node/expected.json"));
    let total = costs["total"].as_f64().unwrap();
    assert!((total - expected["total"].as_f64().unwrap()).abs() < 1e-9);
    let clips: Vec<Value> = costs["steps"].as_array().unwrap().iter().map(|s| s["clip"].clone()).collect();
    assert_eq!(Value::from(clips), expected["clips"]);
    let sum: f64 = costs["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["emission"].as_f64().unwrap() + s["transition"].as_f64().unwrap())
        .sum();
    assert!((sum - total).abs() < 1e-9);
}

#[test]
fn segmented_compose_inserts_transitions() {
    let d = tmp();
    ok(&["compose", "--config", &fx("compose/library/config.toml"), "--out", &d.path().display().to_string()]);
    let track = read_json(&d.path().join("track.json"));
    let clips = track["clips"].as_array().unwrap();
    assert_eq!(clips.iter().filter(|c| c["inserted"] == true).count(), 3);
    let frames: u64 = clips.iter().map(|c| c["frame_count"].as_u64().unwrap()).sum();
    assert_eq!(frames as usize, track["frames"].as_array().unwrap().len());
    let bvh = std::fs::read_to_string(d.path().join("track.bvh")).unwrap();
    assert!(bvh.contains(&format!("Frames: {frames}")));
}

#[test]
fn single_embedding_gives_single_clip_track() {
    let d = tmp();
    let audio = std::fs::read_to_string(fixtures().join("compose/four-node/audio.csv")).unwrap();
    let first = audio.lines().find(|l| !l.starts_with('#')).unwrap();
    let path = d.path().join("one.csv");
    std::fs::write(&path, format!("{first}\n")).unwrap();
    let out = d.path().join("out");
    ok(&[
        "compose",
        "--config",
        &fx("compose/four-node/config.toml"),
        "--set",
        &format!("embeddings={}", path.display()),
        "--out",
        &out.display().to_string(),
    ]);
    let track = read_json(&out.join("track.json"));
    assert_eq!(track["clips"].as_array().unwrap().len(), 1);
}

#[test]
fn infeasible_path_exits_3_naming_the_step() {
    let d = tmp();
    let mut lib = read_json(&fixtures().join("compose/four-node/library.json"));
    lib["adjacency"] = Value::Array(Vec::new());
    let lib_path = d.path().join("library.json");
    std::fs::write(&lib_path, lib.to_string()).unwrap();
    let (code, err) = fail(&[
        "compose",
        "--config",
        &fx("compose/four-node/config.toml"),
        "--set",
        &format!("library={}", lib_path.display()),
        "--out",
        &d.path().join("out").display().to_string(),
    ]);
    assert_eq!(code, 3);
    assert_eq!(err["error"]["kind"], "infeasible");
    assert_eq!(err["error"]["step"], 1);
}

#[test]
fn color_blend_and_zero_alpha_correction() {
    let d = tmp();
    let out = d.path().display().to_string();
    ok(&["color", "blend", "--config", &fx("color/blend.toml"), "--out", &out]);
    let blended = image::open(d.path().join("blended.png")).unwrap().to_rgb8();
    let original = image::open(fixtures().join("color/texture.png")).unwrap().to_rgb8();
    assert_eq!(blended.dimensions(), original.dimensions());

    // Any model works for alpha = 0; train a tiny one.
    let model_dir = d.path().join("model");
    ok(&[
        "color",
        "train",
        "--config",
        &fx("color/train.toml"),
        "--set",
        "pair_count=200",
        "--set",
        "held_out=50",
        "--set",
        "training.max_epochs=2",
        "--out",
        &model_dir.display().to_string(),
    ]);
    let model = format!("model={}", model_dir.join("color_model.json").display());
    let out0 = d.path().join("alpha0");
    ok(&["color", "correct", "--config", &fx("color/correct.toml"), "--set", &model, "alpha=0", "--out", &out0.display().to_string()]);
    let corrected = image::open(out0.join("corrected.png")).unwrap().to_rgb8();
    assert_eq!(corrected.as_raw(), original.as_raw());
    let text = std::fs::read(out0.join("corrected.png")).unwrap();
    assert!(text.windows(8).any(|w| w == b"rigforge"));
}

#[test]
fn corrupted_color_model_exits_2() {
    let d = tmp();
    let bad = d.path().join("model.json");
    std::fs::write(&bad, r#"{"schema": "rigforge.color-model/v1", "layers": "#).unwrap();
    let (code, err) = fail(&[
        "color",
        "correct",
        "--config",
        &fx("color/correct.toml"),
        "--set",
        &format!("model={}", bad.display()),
        "--out",
        &d.path().join("out").display().to_string(),
    ]);
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "schema");
}

#[test]
fn face_drive_with_empty_events_matches_plain_drive_and_checks_dimension() {
    let d = tmp();
    let model_dir = d.path().join("model");
    ok(&["face", "train", "--config", &fx("face/train.toml"), "--set", "training.max_epochs=2", "--out", &model_dir.display().to_string()]);
    let model = format!("model={}", model_dir.join("face_model.json").display());
    let plain = d.path().join("plain");
    let empty = d.path().join("empty");
    let plain_cfg = d.path().join("plain.toml");
    std::fs::write(&plain_cfg, format!("features = \"{}\"\n", fx("face/held_features_0.json"))).unwrap();
    ok(&["face", "drive", "--config", &plain_cfg.display().to_string(), "--set", &model, "--out", &plain.display().to_string()]);
    ok(&[
        "face",
        "drive",
        "--config",
        &fx("face/drive.toml"),
        "--set",
        &model,
        "--set",
        &format!("events={}", fixtures().join("face/events_empty.json").display()),
        "--out",
        &empty.display().to_string(),
    ]);
    let values = |dir: &Path| read_json(&dir.join("coefficients.json"))["values"].clone();
    assert_eq!(values(&plain), values(&empty));
    let spliced = d.path().join("spliced");
    ok(&["face", "drive", "--config", &fx("face/drive.toml"), "--set", &model, "--out", &spliced.display().to_string()]);
    let report = read_json(&spliced.join("drive_report.json"));
    assert_eq!(report["applied"], 2);
    assert_eq!(report["skipped"].as_array().unwrap().len(), 1);
    assert_ne!(values(&plain), values(&spliced));

    let feats = d.path().join("narrow.json");
    std::fs::write(
        &feats,
        r#"{"schema": "rigforge.feature-track/v1", "fps": 50.0, "dimension": 3, "frames": 2, "values": [[0, 0, 0], [1, 1, 1]]}"#,
    )
    .unwrap();
    let (code, err) = fail(&[
        "face",
        "drive",
        "--config",
        &fx("face/drive.toml"),
        "--set",
        &model,
        "--set",
        &format!("features={}", feats.display()),
    ]);
    assert_eq!(code, 2);
    assert!(err["error"]["message"].as_str().unwrap().contains('3'));
}

#[test]
fn flags_override_config_seed_and_out() {
    let d = tmp();
    let cfg = d.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 3\nout = \"from-config\"\nlibrary = \"{}\"\nembeddings = \"{}\"\nlambda2 = 0.5\nvalidate = false\n",
            fx("compose/four-node/library.json"),
            fx("compose/four-node/audio.csv")
        ),
    )
    .unwrap();
    ok(&["compose", "--config", &cfg.display().to_string()]);
    let costs = read_json(&d.path().join("from-config/costs.json"));
    assert_eq!(costs["provenance"]["seed"], 3);
    let flag_out = d.path().join("from-flag");
    ok(&["compose", "--config", &cfg.display().to_string(), "--seed", "9", "--out", &flag_out.display().to_string()]);
    let again = read_json(&flag_out.join("costs.json"));
    assert_eq!(again["provenance"]["seed"], 9);
    assert_eq!(again["provenance"]["config_sha256"], costs["provenance"]["config_sha256"]);
}

#[test]
fn fixture_pack_regenerates_identically() {
    let manifest = std::fs::read_to_string(fixtures().join("MANIFEST.toml")).unwrap();
    let seed = manifest
        .lines()
        .find_map(|l| l.strip_prefix("seed = "))
        .expect("seed line")
        .trim()
        .to_string();
    let d = tmp();
    ok(&["fixtures", "--out", &d.path().display().to_string(), "--seed", &seed]);
    let mut stack = vec![fixtures()];
    let mut n = 0;
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(fixtures()).unwrap();
            let fresh = std::fs::read(d.path().join(rel)).unwrap_or_default();
            assert!(fresh == std::fs::read(&p).unwrap(), "{} differs", rel.display());
            n += 1;
        }
    }
    assert!(n > 20);
}
