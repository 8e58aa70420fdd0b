use std::time::Instant;

use proptest::prelude::*;
use rigforge_core::motion::synth::{audio_for, library, random_graph, LibraryConfig};
use rigforge_core::motion::{
    brute_force_path, build_graph, compose_segments, compose_track, geodesic_angle, viterbi_path,
    Category, EmbeddingMetric, MotionGraph, PoseTolerance, Segment,
};
use rigforge_core::Error;

const SQ: EmbeddingMetric = EmbeddingMetric::SquaredEuclidean;

#[test]
fn viterbi_equals_enumeration_on_fifty_graphs() {
    let start = Instant::now();
    let mut feasible = 0;
    for seed in 0..50u64 {
        let nodes = 2 + (seed % 5) as usize;
        let steps = 1 + (seed % 5) as usize;
        let (g, audio) = random_graph(nodes, steps, 8, seed);
        let bf = brute_force_path(&g, &audio, None, SQ).unwrap();
        match viterbi_path(&g, &audio, None, SQ) {
            Ok(r) => {
                let (seq, cost) = bf.expect("enumeration finds a path");
                assert!((r.total - cost).abs() < 1e-9, "seed {seed}: {} vs {cost}", r.total);
                assert_eq!(r.clips, seq, "seed {seed}");
                feasible += 1;
            }
            Err(Error::Infeasible { .. }) => assert!(bf.is_none(), "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    assert!(feasible >= 40);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn ties_resolve_to_lowest_ids() {
    let (g, _) = random_graph(4, 1, 4, 0);
    let clips: Vec<_> = g
        .clips()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.embedding = vec![0.0; 4];
            c.frames = vec![g.clips()[0].frames[0].clone()];
            c
        })
        .collect();
    let adjacency: Vec<(usize, usize)> = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).collect();
    let flat = build_graph(&clips, &adjacency, 1.0, 1.0).unwrap();
    let audio = vec![vec![0.5; 4]; 3];
    let r = viterbi_path(&flat, &audio, None, SQ).unwrap();
    let (seq, cost) = brute_force_path(&flat, &audio, None, SQ).unwrap().unwrap();
    assert_eq!(r.clips, vec![0, 0, 0]);
    assert_eq!(r.clips, seq);
    assert_eq!(r.total, cost);
}

#[test]
fn relaxations_grow_linearly_with_steps() {
    let (g, _) = random_graph(6, 1, 8, 11);
    let adjacency: Vec<(usize, usize)> = (0..6).flat_map(|a| (0..6).map(move |b| (a, b))).collect();
    let g = build_graph(g.clips(), &adjacency, 1.0, 1.0).unwrap();
    let audio = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|i| vec![0.1 * i as f64; 8]).collect() };
    for n in [5usize, 10, 20, 40] {
        let r = viterbi_path(&g, &audio(n), None, SQ).unwrap();
        assert_eq!(r.stats.relaxations, (n - 1) * 36);
    }
}

fn small_graph(seed: u64) -> MotionGraph {
    let lib = library(&LibraryConfig::small(), seed);
    lib.validate(&PoseTolerance::default()).unwrap();
    MotionGraph::from_library(&lib, 1.0, 1.0).unwrap()
}

#[test]
fn single_clip_track_is_that_clip() {
    let g = small_graph(1);
    let t = compose_track(&g, &[2], 0).unwrap();
    assert_eq!(t.frames, g.clips()[2].frames);
    assert_eq!(t.clips.len(), 1);
    assert_eq!(t.fps, 50.0);
}

#[test]
fn junction_within_pose_tolerance() {
    let g = small_graph(2);
    let tol = PoseTolerance::default();
    for e in g.edges() {
        let (a, b) = (&g.clips()[e.from], &g.clips()[e.to]);
        let t = compose_track(&g, &[a.id, b.id], 0).unwrap();
        let cut = t.clips[1].start_frame;
        let (x, y) = (&t.frames[cut - 1], &t.frames[cut]);
        for (p, q) in x.joints.iter().zip(&y.joints) {
            assert!(geodesic_angle(p.rotation, q.rotation) <= 2.0 * tol.angle);
        }
    }
}

#[test]
fn category_switch_inserts_transition() {
    let g = small_graph(3);
    let a = g.category_nodes(0)[0];
    let b = g.category_nodes(2)[1];
    let path = [g.clips()[a].id, g.clips()[b].id];
    let t = compose_track(&g, &path, 9).unwrap();
    assert_eq!(t.clips.len(), 3);
    assert!(t.clips[1].inserted);
    assert_eq!(t.clips[1].category, Category::Transition { from: 0, to: 2 });
    let frames: usize = t.clips.iter().map(|c| c.frame_count).sum();
    assert_eq!(frames, t.frames.len());
    assert_eq!(compose_track(&g, &path, 9).unwrap(), t);
}

#[test]
fn missing_transition_is_composition_error() {
    let mut lib = library(&LibraryConfig::small(), 4);
    lib.clips.retain(|c| c.category != Category::Transition { from: 1, to: 0 });
    let ids: Vec<usize> = lib.clips.iter().map(|c| c.id).collect();
    lib.adjacency.retain(|(a, b)| ids.contains(a) && ids.contains(b));
    let g = MotionGraph::from_library(&lib, 1.0, 1.0).unwrap();
    let a = g.clips()[g.category_nodes(1)[0]].id;
    let b = g.clips()[g.category_nodes(0)[0]].id;
    assert!(matches!(compose_track(&g, &[a, b], 0), Err(Error::Composition(_))));
}

#[test]
fn segments_follow_requested_categories() {
    let lib = library(&LibraryConfig::small(), 5);
    let g = MotionGraph::from_library(&lib, 1.0, 1.0).unwrap();
    let cats = [0u8, 0, 0, 2, 2, 1, 1, 1];
    let audio = audio_for(&lib, &cats, 7);
    let segments = [
        Segment { category: 0, steps: 3 },
        Segment { category: 2, steps: 2 },
        Segment { category: 1, steps: 3 },
    ];
    let plan = compose_segments(&g, &audio, &segments, SQ, 0).unwrap();
    let picked: Vec<Category> = plan.track.clips.iter().filter(|c| !c.inserted).map(|c| c.category).collect();
    assert_eq!(picked, cats.iter().map(|&c| Category::Pose(c)).collect::<Vec<_>>());
    let total: f64 = plan.segments.iter().flat_map(|s| &s.steps).map(|s| s.emission + s.transition).sum();
    assert!((total - plan.total).abs() < 1e-9);
    assert!(matches!(
        compose_segments(&g, &audio, &segments[..2], SQ, 0),
        Err(Error::Invalid(_))
    ));
}

#[test]
fn track_json_and_bvh_round_trip() {
    let g = small_graph(6);
    let t = compose_track(&g, &[0, 1], 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("track.json");
    t.write(&path).unwrap();
    assert_eq!(rigforge_core::motion::MotionTrack::read(&path).unwrap(), t);
    let bvh = t.to_bvh(&["seed 0".into()]);
    assert!(bvh.starts_with("# seed 0\nHIERARCHY"));
    assert!(bvh.contains(&format!("Frames: {}", t.frames.len())));
    assert_eq!(bvh.lines().count(), bvh.lines().position(|l| l.starts_with("Frame Time")).unwrap() + 1 + t.frames.len());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(48) })]

    #[test]
    fn composed_frames_are_the_sum_of_clip_frames(seed in 0u64..1000, len in 1usize..8) {
        let lib = library(&LibraryConfig::small(), seed % 7);
        let g = MotionGraph::from_library(&lib, 1.0, 1.0).unwrap();
        // Random walk over pose clips, switching category freely.
        let mut rng = seed;
        let mut next = || { rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (rng >> 33) as usize };
        let pose_nodes: Vec<usize> = (0..g.clips().len()).filter(|&v| !g.clips()[v].category.is_transition()).collect();
        let mut path = vec![pose_nodes[next() % pose_nodes.len()]];
        while path.len() < len {
            let u = *path.last().unwrap();
            let same: Vec<usize> = g.edges().iter().filter(|e| e.from == u && !g.clips()[e.to].category.is_transition()).map(|e| e.to).collect();
            let v = if !same.is_empty() && next() % 2 == 0 { same[next() % same.len()] } else {
                let others: Vec<usize> = pose_nodes.iter().copied().filter(|&v| g.clips()[v].category != g.clips()[u].category).collect();
                others[next() % others.len()]
            };
            path.push(v);
        }
        let ids: Vec<usize> = path.iter().map(|&v| g.clips()[v].id).collect();
        let t = compose_track(&g, &ids, seed).unwrap();
        let expected: usize = t.clips.iter().map(|c| g.clips()[g.node_of(c.clip).unwrap()].frames.len()).sum();
        prop_assert_eq!(t.frames.len(), expected);
        for w in t.clips.windows(2) {
            let (a, b) = (w[0].category, w[1].category);
            prop_assert_eq!(a.end(), b.start());
        }
        let direct: Vec<usize> = t.clips.iter().filter(|c| !c.inserted).map(|c| c.clip).collect();
        prop_assert_eq!(direct, ids);
    }

    #[test]
    fn costs_are_non_negative(seed in 0u64..500) {
        let (g, audio) = random_graph(5, 4, 8, seed);
        prop_assert!(g.edges().iter().all(|e| e.weight >= 0.0));
        if let Ok(r) = viterbi_path(&g, &audio, None, SQ) {
            prop_assert!(r.steps.iter().all(|s| s.emission >= 0.0 && s.transition >= 0.0));
        }
    }
}
