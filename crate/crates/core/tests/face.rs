use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use rigforge_core::face::synth::{control_names, linear_fixture, templates, FixtureConfig, LinearFixture};
use rigforge_core::face::{
    apply_interjections, drive_face, evaluate, rec_loss, train_face_model, vel_loss, AudioFeatureTrack,
    FaceRegressor, FaceTrainConfig, InterjectionEvent, RigCoefficientTrack,
};
use rigforge_core::Error;

fn fixture() -> &'static (LinearFixture, FaceRegressor, f64) {
    static CELL: OnceLock<(LinearFixture, FaceRegressor, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let fx = linear_fixture(&FixtureConfig::default(), 1, 1);
        let start = Instant::now();
        let model = train_face_model(&fx.features, &fx.targets, &FaceTrainConfig::default()).unwrap();
        (fx, model, start.elapsed().as_secs_f64())
    })
}

#[test]
fn linear_task_converges() {
    let (_, model, secs) = fixture();
    let held = linear_fixture(&FixtureConfig { tracks: 2, ..FixtureConfig::default() }, 1, 99);
    let eval = evaluate(model, &held.features, &held.targets).unwrap();
    eprintln!(
        "trained in {secs:.1}s, {} epochs; held-out L_rec/entry {:.2e}, L_vel/entry {:.2e}",
        model.metadata.epochs, eval.rec_per_entry, eval.vel_per_entry
    );
    assert!(eval.rec_per_entry < 1e-4);
    assert!(model.metadata.held_out_rec < 1e-4);
    assert!(*secs < 300.0);
}

#[test]
fn window_locality_probe() {
    let (fx, model, _) = fixture();
    let w = model.window;
    let base: Vec<Vec<f64>> = fx.features[0].frames[..60].to_vec();
    let track = AudioFeatureTrack::new(50.0, base.clone()).unwrap();
    let out = drive_face(model, &track).unwrap();
    assert_eq!(out.frame_count(), 60);
    for s in 0..60usize {
        let mut probe = base.clone();
        probe[s].iter_mut().for_each(|x| *x += 3.0);
        let moved = drive_face(model, &AudioFeatureTrack::new(50.0, probe).unwrap()).unwrap();
        for t in 0..60usize {
            if t.abs_diff(s) > w {
                assert_eq!(moved.values[t], out.values[t], "frame {t} moved when frame {s} changed");
            }
        }
    }
}

#[test]
fn drive_is_deterministic_and_checks_dimension() {
    let (fx, model, _) = fixture();
    let a = drive_face(model, &fx.features[1]).unwrap();
    let b = drive_face(model, &fx.features[1]).unwrap();
    assert_eq!(a, b);
    assert!(a.values.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
    let bad = AudioFeatureTrack::new(50.0, vec![vec![0.0; 7]; 5]).unwrap();
    assert!(matches!(drive_face(model, &bad), Err(Error::Model(_))));
}

#[test]
fn model_file_round_trip() {
    let (fx, model, _) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("face.json");
    model.write(&p, None).unwrap();
    let back = FaceRegressor::read(&p).unwrap();
    assert_eq!(drive_face(&back, &fx.features[2]).unwrap(), drive_face(model, &fx.features[2]).unwrap());
}

fn small_config() -> FaceTrainConfig {
    FaceTrainConfig {
        hidden: vec![16, 16],
        max_epochs: 40,
        ..FaceTrainConfig::default()
    }
}

fn small_fixture() -> LinearFixture {
    linear_fixture(&FixtureConfig { controls: 4, feature_dim: 3, tracks: 2, frames: 200, fps: 50.0 }, 5, 5)
}

#[test]
fn training_is_reproducible() {
    let fx = small_fixture();
    let a = train_face_model(&fx.features, &fx.targets, &small_config()).unwrap();
    let b = train_face_model(&fx.features, &fx.targets, &small_config()).unwrap();
    assert_eq!(a.mlp.params(), b.mlp.params());
}

#[test]
fn constant_target_gives_constant_output() {
    let fx = small_fixture();
    let targets: Vec<RigCoefficientTrack> = fx
        .targets
        .iter()
        .map(|t| RigCoefficientTrack::new(50.0, t.controls.clone(), vec![vec![0.3; 4]; t.frame_count()]).unwrap())
        .collect();
    let cfg = FaceTrainConfig { max_epochs: 300, patience: 300, ..small_config() };
    let model = train_face_model(&fx.features, &targets, &cfg).unwrap();
    let eval = evaluate(&model, &fx.features, &targets).unwrap();
    assert!(eval.rec_per_entry < 1e-5, "{}", eval.rec_per_entry);
}

#[test]
fn duplicated_pairs_keep_the_mean_loss() {
    let fx = small_fixture();
    let model = train_face_model(&fx.features, &fx.targets, &FaceTrainConfig { max_epochs: 3, ..small_config() }).unwrap();
    let once = evaluate(&model, &fx.features, &fx.targets).unwrap();
    let f2: Vec<_> = fx.features.iter().chain(&fx.features).cloned().collect();
    let t2: Vec<_> = fx.targets.iter().chain(&fx.targets).cloned().collect();
    let twice = evaluate(&model, &f2, &t2).unwrap();
    assert!((once.rec_per_entry - twice.rec_per_entry).abs() < 1e-15);
    assert!((once.vel_per_entry - twice.vel_per_entry).abs() < 1e-15);
}

#[test]
fn mismatched_pairs_are_rejected() {
    let fx = small_fixture();
    let short = RigCoefficientTrack::new(50.0, control_names(4), vec![vec![0.5; 4]; 10]).unwrap();
    assert!(matches!(
        train_face_model(&fx.features[..1], &[short], &small_config()),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn empty_event_list_leaves_drive_output() {
    let (fx, model, _) = fixture();
    let out = drive_face(model, &fx.features[0]).unwrap();
    let set = templates(20, 50.0, 0);
    assert_eq!(apply_interjections(&out, &[], &set).unwrap().0, out);
}

fn track_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..12, 1usize..5).prop_flat_map(|(t, n)| prop::collection::vec(prop::collection::vec(0.0..=1.0f64, n), t))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn losses_are_non_negative_and_zero_at_equality(a in track_strategy(), seed in 0u64..1000) {
        let b: Vec<Vec<f64>> = a.iter().enumerate().map(|(t, r)| r.iter().enumerate().map(|(i, x)| (x + ((seed + (t * 7 + i) as u64) % 5) as f64 * 0.1).fract()).collect()).collect();
        prop_assert!(rec_loss(&a, &b).unwrap() >= 0.0);
        prop_assert!(vel_loss(&a, &b).unwrap() >= 0.0);
        prop_assert_eq!(rec_loss(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(vel_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn vel_loss_ignores_constant_offsets(a in track_strategy(), offset in -1.0..1.0f64) {
        let shifted: Vec<Vec<f64>> = a.iter().map(|r| r.iter().enumerate().map(|(i, x)| x + offset * (i + 1) as f64).collect()).collect();
        prop_assert!(vel_loss(&shifted, &a).unwrap() < 1e-20);
        if offset.abs() > 1e-6 {
            prop_assert!(rec_loss(&shifted, &a).unwrap() > 0.0);
        }
    }

    #[test]
    fn interjections_keep_length_and_range(times in prop::collection::vec((0usize..3, 0.0..2.0f64), 0..6)) {
        let base = RigCoefficientTrack::new(50.0, control_names(20), vec![vec![0.5; 20]; 100]).unwrap();
        let set = templates(20, 50.0, 3);
        let tokens = ["wow", "oh", "hmm"];
        let events: Vec<InterjectionEvent> = times.iter().map(|&(k, t)| InterjectionEvent { token: tokens[k].into(), time: t }).collect();
        let (out, skipped) = apply_interjections(&base, &events, &set).unwrap();
        prop_assert_eq!(out.frame_count(), 100);
        prop_assert!(out.values.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
        prop_assert_eq!(skipped.len(), times.iter().filter(|(k, _)| *k == 2).count());
    }
}
