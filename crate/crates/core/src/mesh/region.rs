use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{schema, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLabel {
    Fixed,
    Replaceable,
    Transition,
}

/// Per-vertex partition into fixed, replaceable and transition vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    labels: Vec<RegionLabel>,
}

/// On-disk form: either explicit labels, or a replaceable set from which the
/// transition band is derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionMaskFile {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<RegionLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    replaceable: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition_rings: Option<usize>,
}

pub const DEFAULT_TRANSITION_RINGS: usize = 3;

impl RegionMask {
    pub fn from_labels(mesh: &Mesh, labels: Vec<RegionLabel>) -> Result<Self> {
        if labels.len() != mesh.vertex_count() {
            return Err(Error::Dimension(format!(
                "{} region labels for {} vertices",
                labels.len(),
                mesh.vertex_count()
            )));
        }
        let mask = Self { labels };
        mask.check_transition_adjacency(mesh)?;
        Ok(mask)
    }

    /// Builds the mask from the replaceable vertex set. Vertices within
    /// `rings` edge hops of the region boundary, on either side, become
    /// transition vertices.
    pub fn from_replaceable(mesh: &Mesh, replaceable: &[usize], rings: usize) -> Result<Self> {
        let n = mesh.vertex_count();
        let mut inside = vec![false; n];
        for &i in replaceable {
            if i >= n {
                return Err(Error::Invalid(format!(
                    "replaceable index {i} out of range for {n} vertices"
                )));
            }
            inside[i] = true;
        }
        let nbrs = mesh.vertex_neighbors();
        let dist_to_inside = bfs_distance(&nbrs, |v| inside[v]);
        let dist_to_outside = bfs_distance(&nbrs, |v| !inside[v]);
        let labels = (0..n)
            .map(|v| {
                let d = if inside[v] {
                    dist_to_outside[v]
                } else {
                    dist_to_inside[v]
                };
                match (inside[v], d <= rings) {
                    (_, true) => RegionLabel::Transition,
                    (true, false) => RegionLabel::Replaceable,
                    (false, false) => RegionLabel::Fixed,
                }
            })
            .collect();
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[RegionLabel] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> RegionLabel {
        self.labels[v]
    }

    pub fn indices_of(&self, label: RegionLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of edge rings in the transition band, measured as the largest
    /// hop distance from a transition vertex to the nearest non-transition
    /// vertex.
    pub fn transition_ring_count(&self, mesh: &Mesh) -> usize {
        let nbrs = mesh.vertex_neighbors();
        let d = bfs_distance(&nbrs, |v| self.labels[v] != RegionLabel::Transition);
        self.indices_of(RegionLabel::Transition)
            .into_iter()
            .map(|v| d[v])
            .filter(|&d| d != usize::MAX)
            .max()
            .unwrap_or(0)
    }

    fn check_transition_adjacency(&self, mesh: &Mesh) -> Result<()> {
        let has = |l| self.labels.contains(&l);
        if !(has(RegionLabel::Transition) && has(RegionLabel::Fixed) && has(RegionLabel::Replaceable))
        {
            return Ok(());
        }
        let nbrs = mesh.vertex_neighbors();
        let touches = |other: RegionLabel| {
            self.labels.iter().enumerate().any(|(v, &l)| {
                l == RegionLabel::Transition && nbrs[v].iter().any(|&u| self.labels[u] == other)
            })
        };
        if !touches(RegionLabel::Fixed) || !touches(RegionLabel::Replaceable) {
            return Err(Error::Invalid(
                "transition region must be edge-adjacent to both fixed and replaceable regions"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn read(path: &Path, mesh: &Mesh) -> Result<Self> {
        let file: RegionMaskFile = schema::read_json(path, schema::REGION_MASK)?;
        match (file.labels, file.replaceable) {
            (Some(labels), None) => Self::from_labels(mesh, labels),
            (None, Some(rep)) => Self::from_replaceable(
                mesh,
                &rep,
                file.transition_rings.unwrap_or(DEFAULT_TRANSITION_RINGS),
            ),
            _ => Err(Error::schema(
                path,
                "exactly one of `labels` or `replaceable` is required",
            )),
        }
        .map_err(|e| match e {
            Error::Schema { .. } => e,
            other => Error::schema(path, other),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(
            path,
            &RegionMaskFile {
                schema: schema::REGION_MASK.into(),
                labels: Some(self.labels.clone()),
                replaceable: None,
                transition_rings: None,
            },
        )
    }
}

/// Multi-source BFS hop distance to the nearest vertex satisfying `source`.
fn bfs_distance(nbrs: &[Vec<usize>], source: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut dist = vec![usize::MAX; nbrs.len()];
    let mut queue = VecDeque::new();
    for v in 0..nbrs.len() {
        if source(v) {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &nbrs[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}
