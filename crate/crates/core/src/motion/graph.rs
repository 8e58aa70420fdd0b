use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::clip::{Category, ClipLibrary, MotionClip};
use super::pose::pose_costs;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Node indices (positions in [`MotionGraph::clips`]).
    pub from: usize,
    pub to: usize,
    pub translation_cost: f64,
    pub rotation_cost: f64,
    /// `λ1·T_p + λ2·T_r`.
    pub weight: f64,
}

/// Clips as nodes, ordered by clip id, with weighted continuation edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionGraph {
    clips: Vec<MotionClip>,
    edges: Vec<Edge>,
    /// Incoming edge indices per node, sorted by source node.
    incoming: Vec<Vec<usize>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub embedding_dim: usize,
    /// Skeleton joint names and frame rate carried into composed tracks.
    pub joints: Vec<String>,
    pub fps: f64,
}

/// Frame rate assumed when a graph is built without library metadata.
pub const DEFAULT_FPS: f64 = 50.0;

/// `Pose(a) → Pose(a)`, `Pose(a) → Transition(a→b)`, `Transition(a→b) →
/// Pose(b)`, and transition chains: the end pose of one clip must be the
/// start pose of the next.
fn legal(a: Category, b: Category) -> bool {
    a.end() == b.start() && (a.is_transition() || b.is_transition() || a == b)
}

/// Builds the graph with one edge per adjacency pair `(from id, to id)`.
pub fn build_graph(
    clips: &[MotionClip],
    adjacency: &[(usize, usize)],
    lambda1: f64,
    lambda2: f64,
) -> Result<MotionGraph> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
        return Err(Error::Graph(format!("edge weights λ1={lambda1}, λ2={lambda2} must be finite and ≥ 0")));
    }
    let mut clips = clips.to_vec();
    clips.sort_by_key(|c| c.id);
    let index: BTreeMap<usize, usize> = clips.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    if index.len() != clips.len() {
        return Err(Error::Graph("duplicate clip id".into()));
    }
    let embedding_dim = clips.first().map_or(0, |c| c.embedding.len());
    if let Some(c) = clips.iter().find(|c| c.embedding.len() != embedding_dim) {
        return Err(Error::Graph(format!(
            "clip {} has embedding dimension {}, expected {embedding_dim}",
            c.id,
            c.embedding.len()
        )));
    }
    if let Some(c) = clips.iter().find(|c| c.frames.is_empty()) {
        return Err(Error::Graph(format!("clip {} has no frames", c.id)));
    }
    let mut seen = BTreeSet::new();
    let mut edges = Vec::with_capacity(adjacency.len());
    for &(a, b) in adjacency {
        let lookup = |id: usize| index.get(&id).copied().ok_or_else(|| Error::Graph(format!("adjacency references unknown clip {id}")));
        let (from, to) = (lookup(a)?, lookup(b)?);
        if !seen.insert((from, to)) {
            return Err(Error::Graph(format!("duplicate edge {a} -> {b}")));
        }
        let (ca, cb) = (clips[from].category, clips[to].category);
        if !legal(ca, cb) {
            return Err(Error::Graph(format!("illegal edge {a} -> {b}: {ca} cannot continue into {cb}")));
        }
        let (tp, tr) = pose_costs(clips[from].end_pose(), clips[to].start_pose())?;
        let weight = lambda1 * tp + lambda2 * tr;
        if !weight.is_finite() {
            return Err(Error::Graph(format!("edge {a} -> {b} has non-finite weight")));
        }
        edges.push(Edge {
            from,
            to,
            translation_cost: tp,
            rotation_cost: tr,
            weight,
        });
    }
    edges.sort_by_key(|e| (e.to, e.from));
    let mut incoming = vec![Vec::new(); clips.len()];
    for (k, e) in edges.iter().enumerate() {
        incoming[e.to].push(k);
    }
    Ok(MotionGraph {
        clips,
        edges,
        incoming,
        lambda1,
        lambda2,
        embedding_dim,
        joints: Vec::new(),
        fps: DEFAULT_FPS,
    })
}

impl MotionGraph {
    /// Graph over a whole library, keeping its skeleton and frame rate.
    pub fn from_library(library: &ClipLibrary, lambda1: f64, lambda2: f64) -> Result<Self> {
        let mut g = build_graph(&library.clips, &library.adjacency, lambda1, lambda2)?;
        g.joints = library.joints.clone();
        g.fps = library.fps;
        Ok(g)
    }

    pub fn clips(&self) -> &[MotionClip] {
        &self.clips
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Incoming edges of `node`, sorted by source node.
    pub fn incoming(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.incoming[node].iter().map(|&k| &self.edges[k])
    }

    pub fn node_of(&self, clip_id: usize) -> Option<usize> {
        self.clips.binary_search_by_key(&clip_id, |c| c.id).ok()
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.incoming(to).find(|e| e.from == from)
    }

    /// Nodes of pose category `category`, ascending by clip id.
    pub fn category_nodes(&self, category: u8) -> Vec<usize> {
        (0..self.clips.len())
            .filter(|&i| self.clips[i].category == Category::Pose(category))
            .collect()
    }

    /// Transition clips from pose `from` to pose `to`, ascending by clip id.
    pub fn transitions(&self, from: u8, to: u8) -> Vec<usize> {
        (0..self.clips.len())
            .filter(|&i| self.clips[i].category == Category::Transition { from, to })
            .collect()
    }
}
