use serde::{Deserialize, Serialize};

use super::graph::MotionGraph;
use crate::{par, Error, Result};

/// Audio-to-clip emission cost `C_a(A_i, Â)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMetric {
    #[default]
    SquaredEuclidean,
    /// `1 − cos(A, Â)`; zero vectors count as orthogonal to everything.
    Cosine,
}

impl EmbeddingMetric {
    pub fn cost(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            EmbeddingMetric::SquaredEuclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            EmbeddingMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCost {
    pub step: usize,
    pub clip: usize,
    /// `C_a` between the step's audio embedding and the clip's embedding.
    pub emission: f64,
    /// Edge weight from the previous step's clip (0 at the first step).
    pub transition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViterbiStats {
    pub steps: usize,
    /// Edge relaxations performed; grows as `(n − 1) · E` for a fixed graph.
    pub relaxations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViterbiResult {
    /// Selected clip ids, one per audio step.
    pub clips: Vec<usize>,
    pub total: f64,
    pub steps: Vec<StepCost>,
    pub stats: ViterbiStats,
}

fn check_audio(graph: &MotionGraph, audio: &[Vec<f64>]) -> Result<()> {
    if audio.is_empty() {
        return Err(Error::Invalid("audio embedding sequence is empty".into()));
    }
    if let Some((i, a)) = audio.iter().enumerate().find(|(_, a)| a.len() != graph.embedding_dim) {
        return Err(Error::Dimension(format!(
            "audio embedding {i} has dimension {}, graph uses {}",
            a.len(),
            graph.embedding_dim
        )));
    }
    Ok(())
}

fn members(graph: &MotionGraph, category: Option<u8>) -> Result<Vec<bool>> {
    let mask: Vec<bool> = match category {
        Some(c) => {
            let mut m = vec![false; graph.clips().len()];
            for v in graph.category_nodes(c) {
                m[v] = true;
            }
            m
        }
        None => vec![true; graph.clips().len()],
    };
    if !mask.iter().any(|m| *m) {
        return Err(Error::Graph(match category {
            Some(c) => format!("no clips in pose category {c}"),
            None => "graph has no clips".into(),
        }));
    }
    Ok(mask)
}

/// Minimum-cost clip sequence for `audio`:
/// `Σ C_a(A_i, Â_{N_i}) + Σ T(N_i, N_{i+1})`, with every step restricted to
/// clips of `category` (all clips when `None`) and consecutive clips joined
/// by graph edges. Ties go to the lowest clip id.
pub fn viterbi_path(
    graph: &MotionGraph,
    audio: &[Vec<f64>],
    category: Option<u8>,
    metric: EmbeddingMetric,
) -> Result<ViterbiResult> {
    check_audio(graph, audio)?;
    let member = members(graph, category)?;
    let nodes: Vec<usize> = (0..member.len()).filter(|&v| member[v]).collect();
    let clips = graph.clips();
    let emission = |i: usize, v: usize| metric.cost(&audio[i], &clips[v].embedding);

    let mut cost = vec![f64::INFINITY; clips.len()];
    for &v in &nodes {
        cost[v] = emission(0, v);
    }
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(audio.len());
    back.push(vec![usize::MAX; clips.len()]);
    let mut stats = ViterbiStats {
        steps: audio.len(),
        relaxations: 0,
    };

    for i in 1..audio.len() {
        let relaxed = par::map_slice(&nodes, |&v| {
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            let mut count = 0;
            // Sources arrive in ascending node (= clip id) order, so a strict
            // comparison keeps the lowest id on ties.
            for e in graph.incoming(v) {
                if !member[e.from] {
                    continue;
                }
                count += 1;
                let c = cost[e.from] + e.weight;
                if c < best {
                    best = c;
                    arg = e.from;
                }
            }
            (best, arg, count)
        });
        let mut next = vec![f64::INFINITY; clips.len()];
        let mut ptr = vec![usize::MAX; clips.len()];
        for (&v, (best, arg, count)) in nodes.iter().zip(relaxed) {
            stats.relaxations += count;
            if best.is_finite() {
                next[v] = best + emission(i, v);
                ptr[v] = arg;
            }
        }
        if nodes.iter().all(|&v| !next[v].is_finite()) {
            return Err(Error::Infeasible {
                step: i,
                reason: format!(
                    "no edge continues any {i}-step path{} (sequence length {})",
                    category.map_or(String::new(), |c| format!(" within pose category {c}")),
                    audio.len()
                ),
            });
        }
        cost = next;
        back.push(ptr);
    }

    let mut last = usize::MAX;
    for &v in &nodes {
        if cost[v] < cost.get(last).copied().unwrap_or(f64::INFINITY) {
            last = v;
        }
    }
    let total = cost[last];
    let mut path = vec![last; audio.len()];
    for i in (1..audio.len()).rev() {
        path[i - 1] = back[i][path[i]];
    }
    let steps = path
        .iter()
        .enumerate()
        .map(|(i, &v)| StepCost {
            step: i,
            clip: clips[v].id,
            emission: emission(i, v),
            transition: if i == 0 {
                0.0
            } else {
                graph.edge(path[i - 1], v).expect("path follows edges").weight
            },
        })
        .collect();
    Ok(ViterbiResult {
        clips: path.iter().map(|&v| clips[v].id).collect(),
        total,
        steps,
        stats,
    })
}

/// Exhaustive search over every clip sequence, for testing. Returns the
/// lexicographically first (by clip id) optimal sequence and its cost, or
/// `None` when no sequence is feasible.
pub fn brute_force_path(
    graph: &MotionGraph,
    audio: &[Vec<f64>],
    category: Option<u8>,
    metric: EmbeddingMetric,
) -> Result<Option<(Vec<usize>, f64)>> {
    check_audio(graph, audio)?;
    let member = members(graph, category)?;
    let nodes: Vec<usize> = (0..member.len()).filter(|&v| member[v]).collect();
    let clips = graph.clips();
    let n = audio.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut digits = vec![0usize; n];
    'outer: loop {
        let seq: Vec<usize> = digits.iter().map(|&d| nodes[d]).collect();
        let mut c = metric.cost(&audio[0], &clips[seq[0]].embedding);
        let mut feasible = true;
        for i in 1..n {
            match graph.edge(seq[i - 1], seq[i]) {
                Some(e) => c = c + e.weight + metric.cost(&audio[i], &clips[seq[i]].embedding),
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((seq.iter().map(|&v| clips[v].id).collect(), c));
        }
        for d in (0..n).rev() {
            digits[d] += 1;
            if digits[d] < nodes.len() {
                continue 'outer;
            }
            digits[d] = 0;
        }
        break;
    }
    Ok(best)
}
