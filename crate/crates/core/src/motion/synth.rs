//! Seeded synthetic clip libraries and graphs for fixtures, tests and benches.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::clip::{CanonicalPose, Category, ClipLibrary, MotionClip};
use super::graph::{build_graph, MotionGraph};
use super::pose::{Frame, JointState};
use crate::schema;

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryConfig {
    pub categories: u8,
    pub clips_per_category: usize,
    /// Transition clips generated for every ordered pair of categories.
    pub transitions_per_pair: usize,
    pub joints: usize,
    pub fps: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub embedding_dim: usize,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            categories: 5,
            clips_per_category: 20,
            transitions_per_pair: 1,
            joints: 8,
            fps: 50.0,
            min_frames: 100,
            max_frames: 150,
            embedding_dim: 16,
        }
    }
}

impl LibraryConfig {
    /// Three categories of four short clips each.
    pub fn small() -> Self {
        Self {
            categories: 3,
            clips_per_category: 4,
            transitions_per_pair: 1,
            joints: 5,
            fps: 50.0,
            min_frames: 10,
            max_frames: 20,
            embedding_dim: 8,
        }
    }
}

const BODY: [&str; 12] = [
    "pelvis", "spine", "chest", "neck", "head", "shoulder_l", "elbow_l", "wrist_l", "shoulder_r", "elbow_r",
    "wrist_r", "jaw",
];

fn joint_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|j| BODY.get(j).map_or_else(|| format!("joint{j}"), |s| (*s).to_string()))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_axis(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(gaussian(rng), gaussian(rng), gaussian(rng));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

fn unit(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Skeleton offsets shared by every pose, stacked upwards from the root.
fn rest_positions(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|j| {
            let side = if j % 2 == 0 { 1.0 } else { -1.0 };
            [side * 0.05 * (j % 3) as f64, 0.12 * j as f64, 0.0]
        })
        .collect()
}

fn canonical_pose(rest: &[[f64; 3]], rng: &mut ChaCha8Rng) -> Frame {
    Frame {
        root: [0.0; 3],
        joints: rest
            .iter()
            .map(|&position| {
                let q = UnitQuaternion::from_scaled_axis(random_axis(rng) * rng.random_range(0.0..0.6));
                JointState {
                    position,
                    rotation: wxyz(&q),
                }
            })
            .collect(),
    }
}

/// Per-joint motion that starts and ends at rest: `sin(π s)` envelope.
struct Gesture {
    axes: Vec<Vector3<f64>>,
    amplitude: Vec<f64>,
    sway: [f64; 3],
    cycles: f64,
}

impl Gesture {
    fn random(joints: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            axes: (0..joints).map(|_| random_axis(rng)).collect(),
            amplitude: (0..joints).map(|_| rng.random_range(0.05..0.4)).collect(),
            sway: [rng.random_range(-0.05..0.05), rng.random_range(0.0..0.03), rng.random_range(-0.05..0.05)],
            cycles: rng.random_range(1..=3) as f64,
        }
    }

    fn apply(&self, base: &Frame, s: f64) -> Frame {
        let env = (std::f64::consts::PI * s).sin();
        let wave = env * (std::f64::consts::PI * self.cycles * s).sin().abs().max(env * 0.5);
        Frame {
            root: std::array::from_fn(|k| base.root[k] + env * self.sway[k]),
            joints: base
                .joints
                .iter()
                .enumerate()
                .map(|(j, js)| {
                    let d = UnitQuaternion::from_scaled_axis(self.axes[j] * (wave * self.amplitude[j]));
                    JointState {
                        position: js.position,
                        rotation: wxyz(&(d * unit(js.rotation))),
                    }
                })
                .collect(),
        }
    }
}

fn blend(a: &Frame, b: &Frame, s: f64) -> Frame {
    let t = s * s * (3.0 - 2.0 * s);
    Frame {
        root: std::array::from_fn(|k| a.root[k] + t * (b.root[k] - a.root[k])),
        joints: a
            .joints
            .iter()
            .zip(&b.joints)
            .map(|(x, y)| JointState {
                position: std::array::from_fn(|k| x.position[k] + t * (y.position[k] - x.position[k])),
                rotation: if t == 0.0 {
                    x.rotation
                } else if t == 1.0 {
                    y.rotation
                } else {
                    wxyz(&unit(x.rotation).slerp(&unit(y.rotation), t))
                },
            })
            .collect(),
    }
}

fn frame_count(cfg: &LibraryConfig, rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(cfg.min_frames.max(2)..=cfg.max_frames.max(cfg.min_frames.max(2)))
}

fn jittered(center: &[f64], spread: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    center.iter().map(|c| c + spread * gaussian(rng)).collect()
}

/// A lint-clean library. Pose clips leave and return to their category's
/// canonical pose; transition clips blend between two canonical poses.
/// Embeddings cluster around one random centre per category. Adjacency
/// chains each category's clips in a ring (plus a few random shortcuts)
/// and links every transition between a clip of its source and target.
pub fn library(cfg: &LibraryConfig, seed: u64) -> ClipLibrary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = rest_positions(cfg.joints);
    let canon: Vec<Frame> = (0..cfg.categories).map(|_| canonical_pose(&rest, &mut rng)).collect();
    let centres: Vec<Vec<f64>> =
        (0..cfg.categories).map(|_| (0..cfg.embedding_dim).map(|_| gaussian(&mut rng)).collect()).collect();

    let mut clips = Vec::new();
    let mut adjacency = Vec::new();
    let mut by_category: Vec<Vec<usize>> = vec![Vec::new(); cfg.categories as usize];
    for c in 0..cfg.categories {
        for _ in 0..cfg.clips_per_category {
            let id = clips.len();
            let g = Gesture::random(cfg.joints, &mut rng);
            let n = frame_count(cfg, &mut rng);
            let frames = (0..n).map(|t| g.apply(&canon[c as usize], t as f64 / (n - 1) as f64)).collect();
            clips.push(MotionClip {
                id,
                category: Category::Pose(c),
                frames,
                embedding: jittered(&centres[c as usize], 0.2, &mut rng),
            });
            by_category[c as usize].push(id);
        }
        let ids = &by_category[c as usize];
        for k in 0..ids.len() {
            adjacency.push((ids[k], ids[(k + 1) % ids.len()]));
        }
        for _ in 0..ids.len() / 2 {
            let (a, b) = (ids[rng.random_range(0..ids.len())], ids[rng.random_range(0..ids.len())]);
            if !adjacency.contains(&(a, b)) {
                adjacency.push((a, b));
            }
        }
    }
    for from in 0..cfg.categories {
        for to in 0..cfg.categories {
            if from == to {
                continue;
            }
            for _ in 0..cfg.transitions_per_pair {
                let id = clips.len();
                let g = Gesture::random(cfg.joints, &mut rng);
                let n = frame_count(cfg, &mut rng);
                let frames = (0..n)
                    .map(|t| {
                        let s = t as f64 / (n - 1) as f64;
                        let mid = blend(&canon[from as usize], &canon[to as usize], s);
                        g.apply(&mid, s)
                    })
                    .collect();
                let centre: Vec<f64> = centres[from as usize]
                    .iter()
                    .zip(&centres[to as usize])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                clips.push(MotionClip {
                    id,
                    category: Category::Transition { from, to },
                    frames,
                    embedding: jittered(&centre, 0.2, &mut rng),
                });
                let src = &by_category[from as usize];
                let dst = &by_category[to as usize];
                if !src.is_empty() && !dst.is_empty() {
                    adjacency.push((src[rng.random_range(0..src.len())], id));
                    adjacency.push((id, dst[rng.random_range(0..dst.len())]));
                }
            }
        }
    }
    ClipLibrary {
        schema: schema::CLIP_LIBRARY.into(),
        provenance: None,
        joints: joint_names(cfg.joints),
        fps: cfg.fps,
        embedding_dim: cfg.embedding_dim,
        canonical_poses: canon
            .into_iter()
            .enumerate()
            .map(|(c, pose)| CanonicalPose {
                category: c as u8,
                pose,
            })
            .collect(),
        clips,
        adjacency,
    }
}

/// Windows of audio embeddings drawn near the category centres of `lib`,
/// following `categories` (one entry per window).
pub fn audio_for(lib: &ClipLibrary, categories: &[u8], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    categories
        .iter()
        .map(|&c| {
            let members: Vec<&MotionClip> = lib.clips.iter().filter(|m| m.category == Category::Pose(c)).collect();
            let base = &members[rng.random_range(0..members.len().max(1))].embedding;
            jittered(base, 0.1, &mut rng)
        })
        .collect()
}

/// A single-category graph with `nodes` two-frame clips of random poses,
/// each ordered pair (self-loops included) adjacent with probability ½,
/// and `steps` random audio windows of dimension `dim`.
pub fn random_graph(nodes: usize, steps: usize, dim: usize, seed: u64) -> (MotionGraph, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = rest_positions(3);
    let clips: Vec<MotionClip> = (0..nodes)
        .map(|id| MotionClip {
            id,
            category: Category::Pose(0),
            frames: vec![canonical_pose(&rest, &mut rng), {
                let mut f = canonical_pose(&rest, &mut rng);
                f.root = std::array::from_fn(|_| rng.random_range(-0.2..0.2));
                f
            }],
            embedding: (0..dim).map(|_| gaussian(&mut rng)).collect(),
        })
        .collect();
    let mut adjacency = Vec::new();
    for a in 0..nodes {
        for b in 0..nodes {
            if rng.random_bool(0.5) {
                adjacency.push((a, b));
            }
        }
    }
    let graph = build_graph(&clips, &adjacency, 1.0, 0.5).expect("valid random graph");
    let audio = (0..steps).map(|_| (0..dim).map(|_| gaussian(&mut rng)).collect()).collect();
    (graph, audio)
}
