use nalgebra::{Point3, UnitQuaternion};
use rigforge_core::mesh::Mesh;
use rigforge_core::skeleton::synth::{face_rig, perturb_leaves, random_rig};
use rigforge_core::skeleton::{
    calibrate_skeleton, forward_kinematics, lbs_deform, total_loss, total_loss_gradient,
    CalibrationConfig, CalibrationInput, SkeletonRig,
};
use rigforge_core::Vec3;

const H: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in 0..10 {
        let (s, target) = random_rig(seed, 7, 60);
        let base = &s.neutral.vertices;
        let loss = |rig: &SkeletonRig| {
            total_loss(rig, &s.binding, base, &target, &s.overlap).unwrap().total()
        };
        let (_, grads) = total_loss_gradient(&s.rig, &s.binding, base, &target, &s.overlap).unwrap();
        for j in 0..s.rig.len() {
            let joint = s.rig.joints()[j].clone();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = H;
                let mut plus = s.rig.clone();
                plus.set_local(j, joint.translation + e, joint.rotation);
                let mut minus = s.rig.clone();
                minus.set_local(j, joint.translation - e, joint.rotation);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * H);
                let an = grads[j].translation[k];
                assert!(rel_err(an, fd) < 1e-4, "seed {seed} joint {j} t{k}: {an} vs {fd}");

                let mut plus = s.rig.clone();
                plus.set_local(j, joint.translation, UnitQuaternion::from_scaled_axis(e) * joint.rotation);
                let mut minus = s.rig.clone();
                minus.set_local(j, joint.translation, UnitQuaternion::from_scaled_axis(-e) * joint.rotation);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * H);
                let an = grads[j].rotation[k];
                assert!(rel_err(an, fd) < 1e-4, "seed {seed} joint {j} r{k}: {an} vs {fd}");
            }
        }
    }
}

fn skin(rig: &SkeletonRig, s: &rigforge_core::skeleton::synth::SyntheticRig) -> Mesh {
    let verts = lbs_deform(&s.neutral.vertices, &s.binding, &forward_kinematics(rig)).unwrap();
    s.neutral.with_vertices(verts).unwrap()
}

fn assert_non_leaves_untouched(before: &SkeletonRig, after: &SkeletonRig) {
    for j in 0..before.len() {
        if !before.is_leaf(j) {
            assert_eq!(before.joints()[j], after.joints()[j], "joint {j} changed");
        }
    }
}

fn assert_trace_non_increasing(trace: &[rigforge_core::skeleton::TraceEntry]) {
    for w in trace.windows(2) {
        if w[0].stage == w[1].stage {
            assert!(w[1].total <= w[0].total, "trace increased: {:?}", w);
        }
    }
}

#[test]
fn target_equal_to_neutral_is_a_fixed_point() {
    let s = face_rig(3);
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &s.neutral,
            overlap: &s.overlap,
            residual_mask: None,
        },
        &CalibrationConfig::default(),
    )
    .unwrap();
    assert_eq!(result.iterations, 0);
    assert!(result.converged);
    assert_eq!(result.rig, s.rig);
    assert!(result.residual.iter().all(|r| *r == Vec3::zeros()));
    assert!(result.final_losses.total() < 1e-10);
    assert_eq!(result.trace.len(), 1);
}

#[test]
fn recovers_displaced_leaf_translations() {
    let s = face_rig(7);
    let (truth, offsets) = perturb_leaves(&s.rig, 5, 0.05, 11);
    let target = skin(&truth, &s);
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &target,
            overlap: &s.overlap,
            residual_mask: None,
        },
        &CalibrationConfig::default(),
    )
    .unwrap();
    assert!(result.converged);
    for (j, _) in &offsets {
        let err = (result.rig.joints()[*j].translation - truth.joints()[*j].translation).norm();
        assert!(err < 1e-3, "joint {j} translation off by {err}");
    }
    assert!(result.skeleton_fit.vertex < 1e-6 * result.initial.vertex);
    assert!(result.final_losses.vertex < 1e-6 * result.initial.vertex);
    assert_non_leaves_untouched(&s.rig, &result.rig);
    assert_trace_non_increasing(&result.trace);
}

#[test]
fn residual_absorbs_non_skeletal_bump() {
    let s = face_rig(5);
    let (truth, _) = perturb_leaves(&s.rig, 5, 0.05, 2);
    let posed = skin(&truth, &s);
    let centre = Point3::new(0.1, -0.1, 0.0);
    let bumped: Vec<Vec3> = posed
        .vertices
        .iter()
        .map(|v| {
            let d2 = (v.xy() - centre.coords.xy()).norm_squared();
            v + Vec3::new(0.0, 0.0, 0.03 * (-d2 / (2.0 * 0.05f64.powi(2))).exp())
        })
        .collect();
    let target = s.neutral.with_vertices(bumped).unwrap();
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &target,
            overlap: &s.overlap,
            residual_mask: None,
        },
        &CalibrationConfig::default(),
    )
    .unwrap();
    assert!(result.final_losses.vertex < 1e-6, "L_v = {}", result.final_losses.vertex);
    assert!(result.residual.iter().any(|r| r.norm() > 1e-3));
    assert_non_leaves_untouched(&s.rig, &result.rig);
    assert_trace_non_increasing(&result.trace);

    // Skinning the blended neutral with the calibrated rig reproduces the target.
    let blended = result.blended_neutral(&s.neutral.vertices);
    let out = lbs_deform(&blended, &s.binding, &forward_kinematics(&result.rig)).unwrap();
    for (a, b) in out.iter().zip(&target.vertices) {
        assert!((a - b).norm() < 1e-6);
    }
}

#[test]
fn residual_respects_mask() {
    let s = face_rig(9);
    let (truth, _) = perturb_leaves(&s.rig, 3, 0.05, 4);
    let mut target = skin(&truth, &s);
    for v in target.vertices.iter_mut() {
        v.z += 0.01 * v.x;
    }
    let mask: Vec<bool> = s.neutral.vertices.iter().map(|v| v.x > 0.0).collect();
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &target,
            overlap: &s.overlap,
            residual_mask: Some(&mask),
        },
        &CalibrationConfig::default(),
    )
    .unwrap();
    for (r, m) in result.residual.iter().zip(&mask) {
        if !m {
            assert_eq!(*r, Vec3::zeros());
        }
    }
}

#[test]
fn iteration_cap_flags_non_convergence() {
    let s = face_rig(7);
    let (truth, _) = perturb_leaves(&s.rig, 5, 0.05, 11);
    let target = skin(&truth, &s);
    let config = CalibrationConfig {
        max_iterations: 3,
        ..Default::default()
    };
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &target,
            overlap: &s.overlap,
            residual_mask: None,
        },
        &config,
    )
    .unwrap();
    assert!(!result.converged);
}

#[test]
fn rotation_fitting_recovers_a_rotated_leaf() {
    let s = face_rig(4);
    let mut truth = s.rig.clone();
    let j = truth.leaves()[2];
    let joint = truth.joints()[j].clone();
    truth.set_local(
        j,
        joint.translation + Vec3::new(0.01, -0.02, 0.0),
        UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.0, 0.1)) * joint.rotation,
    );
    let target = skin(&truth, &s);
    let config = CalibrationConfig {
        optimize_rotations: true,
        ..Default::default()
    };
    let result = calibrate_skeleton(
        &CalibrationInput {
            rig: &s.rig,
            binding: &s.binding,
            neutral: &s.neutral,
            target: &target,
            overlap: &s.overlap,
            residual_mask: None,
        },
        &config,
    )
    .unwrap();
    assert!(result.skeleton_fit.vertex < 1e-3 * result.initial.vertex);
    assert_non_leaves_untouched(&s.rig, &result.rig);
    assert_trace_non_increasing(&result.trace);
}
