//! Deterministic generator for the in-repo fixture pack.

use std::fmt::Write as _;
use std::path::Path;

use image::{DynamicImage, Rgb, RgbImage};
use rigforge_core::face::{self, Body, InterjectionEvent};
use rigforge_core::mesh::{self, synth::grid, write_obj, Mesh, RegionMask};
use rigforge_core::motion::{
    brute_force_path, synth as motion_synth, AudioEmbeddingSequence, ClipLibrary, EmbeddingMetric,
};
use rigforge_core::skeleton::{forward_kinematics, lbs_deform, synth as rig_synth, RigDocument};
use rigforge_core::{schema, Error};
use serde_json::json;

use crate::error::CliError;
use crate::provenance::Provenance;

fn dir(root: &Path, sub: &str) -> Result<std::path::PathBuf, CliError> {
    let d = root.join(sub);
    std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    Ok(d)
}

fn text(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e).into())
}

fn transfer(root: &Path, seed: u64, prov: &Provenance) -> Result<(), CliError> {
    let header = prov.header_lines();
    let config = "initial = \"initial.obj\"\ndetail = \"detail.obj\"\nlandmarks = \"landmarks.json\"\nmask = \"mask.json\"\n\n[smoothing]\niterations = 10\nlambda = 0.5\n";

    let fx = mesh::synth::bump_fixture(seed);
    let d = dir(root, "transfer/bump")?;
    write_obj(&d.join("initial.obj"), &fx.initial, &header)?;
    write_obj(&d.join("detail.obj"), &fx.detail, &header)?;
    schema::write_json(&d.join("landmarks.json"), &fx.landmarks)?;
    fx.mask.write(&d.join("mask.json"))?;
    text(&d.join("config.toml"), config)?;

    // Flat patch transferred onto itself: the result must match the input.
    let flat = grid(41, 41, 0.01);
    let mask = RegionMask::from_labels(&flat, fx.mask.labels().to_vec())?;
    let d = dir(root, "transfer/identity")?;
    write_obj(&d.join("initial.obj"), &flat, &header)?;
    write_obj(&d.join("detail.obj"), &flat, &header)?;
    schema::write_json(&d.join("landmarks.json"), &fx.landmarks)?;
    mask.write(&d.join("mask.json"))?;
    text(&d.join("config.toml"), config)
}

fn calibrate(root: &Path, seed: u64, prov: &Provenance) -> Result<(), CliError> {
    let header = prov.header_lines();
    let fx = rig_synth::face_rig(seed);
    let (truth, _) = rig_synth::perturb_leaves(&fx.rig, 5, 0.05, seed.wrapping_add(1));
    let posed = lbs_deform(&fx.neutral.vertices, &fx.binding, &forward_kinematics(&truth))?;
    let target = Mesh::new(posed, fx.neutral.faces.clone())?;
    let rig = RigDocument::from_parts(&fx.rig, &fx.binding, &fx.overlap);
    let config = "rig = \"rig.json\"\nneutral = \"neutral.obj\"\ntarget = \"target.obj\"\n";

    let d = dir(root, "calibrate/leaves")?;
    rig.write(&d.join("rig.json"))?;
    write_obj(&d.join("neutral.obj"), &fx.neutral, &header)?;
    write_obj(&d.join("target.obj"), &target, &header)?;
    RigDocument::from_parts(&truth, &fx.binding, &fx.overlap).write(&d.join("reference.json"))?;
    text(&d.join("config.toml"), &format!("{config}reference = \"reference.json\"\n"))?;

    let d = dir(root, "calibrate/identity")?;
    rig.write(&d.join("rig.json"))?;
    write_obj(&d.join("neutral.obj"), &fx.neutral, &header)?;
    write_obj(&d.join("target.obj"), &fx.neutral, &header)?;
    text(&d.join("config.toml"), config)
}

fn color(root: &Path, prov: &Provenance) -> Result<(), CliError> {
    let d = dir(root, "color")?;
    let texture = RgbImage::from_fn(128, 128, |x, y| {
        Rgb([(x * 2) as u8, (y * 2) as u8, (((x + y) * 255) / 254) as u8])
    });
    let relit = RgbImage::from_fn(128, 128, |x, y| {
        let p = texture.get_pixel(x, y).0;
        let shade = 0.6 + 0.4 * (x as f64 / 127.0);
        Rgb(p.map(|c| (c as f64 * shade).round() as u8))
    });
    prov.write_png(&d.join("texture.png"), &DynamicImage::ImageRgb8(texture))?;
    prov.write_png(&d.join("relit.png"), &DynamicImage::ImageRgb8(relit))?;
    text(&d.join("train.toml"), "oracle = \"gamma-matrix\"\npair_count = 10000\nheld_out = 1000\n")?;
    text(&d.join("correct.toml"), "# model is supplied at run time: --set model=<color_model.json>\ntexture = \"texture.png\"\nalpha = 1.0\n")?;
    text(&d.join("blend.toml"), "original = \"texture.png\"\nrelit = \"relit.png\"\nalpha = 0.7\n")
}

fn compose(root: &Path, seed: u64, prov: &Provenance) -> Result<(), CliError> {
    let header = prov.header_lines();
    let cfg = motion_synth::LibraryConfig {
        clips_per_category: 5,
        joints: 5,
        min_frames: 12,
        max_frames: 20,
        embedding_dim: 8,
        ..Default::default()
    };
    let mut lib = motion_synth::library(&cfg, seed);
    lib.provenance = Some(prov.json());
    let plan: Vec<u8> = [0u8, 2, 4, 1].iter().flat_map(|&c| std::iter::repeat_n(c, 3)).collect();
    let audio = AudioEmbeddingSequence::new(motion_synth::audio_for(&lib, &plan, seed.wrapping_add(1)), Some(0.4))?;
    let d = dir(root, "compose/library")?;
    lib.write(&d.join("library.json"))?;
    audio.write_csv(&d.join("audio.csv"), &header)?;
    text(
        &d.join("config.toml"),
        "library = \"library.json\"\nembeddings = \"audio.csv\"\nlambda1 = 1.0\nlambda2 = 1.0\n\n[[segments]]\ncategory = 0\nsteps = 3\n\n[[segments]]\ncategory = 2\nsteps = 3\n\n[[segments]]\ncategory = 4\nsteps = 3\n\n[[segments]]\ncategory = 1\nsteps = 3\n",
    )?;

    // Four single-category nodes; the first seed with a feasible 5-step
    // path is kept, and the exhaustive optimum ships as the oracle.
    let (graph, audio, optimum, graph_seed) = (seed..)
        .find_map(|s| {
            let (g, a) = motion_synth::random_graph(4, 5, 8, s);
            match brute_force_path(&g, &a, None, EmbeddingMetric::SquaredEuclidean) {
                Ok(Some(best)) => Some((g, a, best, s)),
                _ => None,
            }
        })
        .expect("some seed is feasible");
    let small = ClipLibrary {
        schema: schema::CLIP_LIBRARY.into(),
        provenance: Some(prov.json()),
        joints: (0..graph.clips()[0].frames[0].joints.len()).map(|j| format!("j{j}")).collect(),
        fps: graph.fps,
        embedding_dim: 8,
        canonical_poses: Vec::new(),
        clips: graph.clips().to_vec(),
        adjacency: graph.edges().iter().map(|e| (graph.clips()[e.from].id, graph.clips()[e.to].id)).collect(),
    };
    let d = dir(root, "compose/four-node")?;
    small.write(&d.join("library.json"))?;
    AudioEmbeddingSequence::new(audio, None)?.write_csv(&d.join("audio.csv"), &header)?;
    prov.write_report(
        &d.join("expected.json"),
        &json!({ "graph_seed": graph_seed, "clips": optimum.0, "total": optimum.1 }),
    )?;
    text(
        &d.join("config.toml"),
        "# random poses share no canonical pose, so the lint is skipped\nlibrary = \"library.json\"\nembeddings = \"audio.csv\"\nlambda1 = 1.0\nlambda2 = 0.5\nvalidate = false\n",
    )
}

fn face(root: &Path, seed: u64, prov: &Provenance) -> Result<(), CliError> {
    let cfg = face::synth::FixtureConfig::default();
    let train = face::synth::linear_fixture(&cfg, seed, seed.wrapping_add(1));
    let held = face::synth::linear_fixture(
        &face::synth::FixtureConfig {
            tracks: 1,
            ..cfg.clone()
        },
        seed,
        seed.wrapping_add(2),
    );
    let d = dir(root, "face")?;
    let mut train_toml = String::new();
    let list = |prefix: &str, n: usize| -> String {
        (0..n).map(|k| format!("\"{prefix}_{k}.json\"")).collect::<Vec<_>>().join(", ")
    };
    for (k, (f, t)) in train.features.iter().zip(&train.targets).enumerate() {
        f.write(&d.join(format!("features_{k}.json")), Body::F32, Some(prov.json()))?;
        t.write(&d.join(format!("targets_{k}.json")), Body::F32, Some(prov.json()))?;
    }
    held.features[0].write(&d.join("held_features_0.json"), Body::F32, Some(prov.json()))?;
    held.targets[0].write(&d.join("held_targets_0.json"), Body::F32, Some(prov.json()))?;
    writeln!(train_toml, "features = [{}]", list("features", cfg.tracks)).unwrap();
    writeln!(train_toml, "targets = [{}]", list("targets", cfg.tracks)).unwrap();
    train_toml.push_str("held_out_features = [\"held_features_0.json\"]\nheld_out_targets = [\"held_targets_0.json\"]\nthreshold = 1e-4\n");
    text(&d.join("train.toml"), &train_toml)?;

    let mut templates = face::synth::templates(cfg.controls, cfg.fps, seed.wrapping_add(3));
    templates.provenance = Some(prov.json());
    templates.write(&d.join("templates.json"))?;
    let events = vec![
        InterjectionEvent {
            token: "wow".into(),
            time: 2.0,
        },
        InterjectionEvent {
            token: "oh".into(),
            time: 12.5,
        },
        InterjectionEvent {
            token: "hmm".into(),
            time: 20.0,
        },
    ];
    schema::write_json(&d.join("events.json"), &events)?;
    text(&d.join("events_empty.json"), "[]\n")?;
    text(
        &d.join("drive.toml"),
        "# model is supplied at run time: --set model=<face_model.json>\nfeatures = \"held_features_0.json\"\ntemplates = \"templates.json\"\nevents = \"events.json\"\n",
    )
}

pub fn run(root: &Path, seed: u64) -> Result<(), CliError> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let prov = Provenance::bare("fixtures", seed);
    transfer(root, seed, &prov)?;
    calibrate(root, seed.wrapping_add(10), &prov)?;
    color(root, &prov)?;
    compose(root, seed.wrapping_add(20), &prov)?;
    face(root, seed.wrapping_add(30), &prov)?;
    let manifest = format!(
        "# Synthetic fixture pack. Regenerate with:\n#   rigforge fixtures --out fixtures --seed {seed}\n\
         tool = \"rigforge {version}\"\nseed = {seed}\n\n\
         [seeds]\ntransfer = {t}\ncalibrate = {c}\ncompose = {m}\nface = {f}\n",
        version = env!("CARGO_PKG_VERSION"),
        t = seed,
        c = seed.wrapping_add(10),
        m = seed.wrapping_add(20),
        f = seed.wrapping_add(30),
    );
    text(&root.join("MANIFEST.toml"), &manifest)
}
