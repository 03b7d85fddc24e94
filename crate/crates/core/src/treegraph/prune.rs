use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::TreeGraph;
use super::paths::PathMap;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSpec {
    pub location: Vec3,
    pub cut_radius: f64,
}

impl CutSpec {
    pub fn new(location: Vec3, cut_radius: f64) -> Self {
        Self { location, cut_radius }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneResult {
    pub cut_nodes: BTreeSet<usize>,
    pub removed_nodes: BTreeSet<usize>,
    /// Every node not removed, including nodes unreachable from the trunk.
    pub kept_nodes: BTreeSet<usize>,
    /// Sorted indices into the cloud the graph was built from.
    pub removed_point_indices: Vec<usize>,
    /// Nodes with no path to the trunk; kept unless they are cut nodes.
    pub unreachable_nodes: BTreeSet<usize>,
}

/// Compact JSON form of a [`PruneResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub cut_nodes: Vec<usize>,
    pub removed_count: usize,
    pub kept_count: usize,
    pub removed_point_indices: Vec<usize>,
}

impl PruneResult {
    pub fn summary(&self) -> PruneSummary {
        PruneSummary {
            cut_nodes: self.cut_nodes.iter().copied().collect(),
            removed_count: self.removed_nodes.len(),
            kept_count: self.kept_nodes.len(),
            removed_point_indices: self.removed_point_indices.clone(),
        }
    }
}

/// Nodes whose shortest path to the trunk passes through any node of
/// `cut_nodes`, plus the cut nodes themselves.
pub fn removed_by_cut_nodes(paths: &PathMap, cut_nodes: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut removed = vec![false; paths.dist.len()];
    for &c in cut_nodes {
        removed[c] = true;
    }
    // `order` visits each node after its next hop.
    for &v in &paths.order {
        if let Some(next) = paths.next_hop[v] {
            removed[v] |= removed[next];
        }
    }
    removed.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect()
}

/// Marks the nodes within each cut's radius and removes every node that
/// reaches the trunk through one of them.
pub fn simulate_prune(graph: &TreeGraph, paths: &PathMap, cuts: &[CutSpec]) -> Result<PruneResult> {
    let mut cut_nodes = BTreeSet::new();
    for (index, cut) in cuts.iter().enumerate() {
        if !(cut.cut_radius > 0.0 && cut.cut_radius.is_finite()) {
            return Err(Error::param("cut_radius", format!("cut {index} has radius {}", cut.cut_radius)));
        }
        let r2 = cut.cut_radius * cut.cut_radius;
        let mut matched = false;
        for n in &graph.nodes {
            if (n.centroid - cut.location).norm_squared() <= r2 {
                cut_nodes.insert(n.id);
                matched = true;
            }
        }
        if !matched {
            return Err(Error::EmptyCut {
                index,
                x: cut.location.x,
                y: cut.location.y,
                z: cut.location.z,
            });
        }
    }

    let removed_nodes = removed_by_cut_nodes(paths, &cut_nodes);
    let kept_nodes: BTreeSet<usize> = (0..graph.len()).filter(|n| !removed_nodes.contains(n)).collect();
    let mut removed_point_indices: Vec<usize> = removed_nodes
        .iter()
        .flat_map(|&n| graph.nodes[n].point_indices.iter().copied())
        .collect();
    removed_point_indices.sort_unstable();
    let unreachable_nodes = (0..graph.len()).filter(|&n| !paths.is_reachable(n)).collect();
    Ok(PruneResult {
        cut_nodes,
        removed_nodes,
        kept_nodes,
        removed_point_indices,
        unreachable_nodes,
    })
}

/// Splits the cloud into `(kept, removed)`, each in original point order.
pub fn apply_prune(cloud: &PointCloud, result: &PruneResult) -> Result<(PointCloud, PointCloud)> {
    let mut removed = vec![false; cloud.len()];
    for &i in &result.removed_point_indices {
        let slot = removed.get_mut(i).ok_or_else(|| {
            Error::Consistency(format!("removed point index {i} is out of range for a cloud of {} points", cloud.len()))
        })?;
        *slot = true;
    }
    let (mut kept, mut gone) = (Vec::new(), Vec::new());
    for (p, r) in cloud.points.iter().zip(removed) {
        if r {
            gone.push(*p);
        } else {
            kept.push(*p);
        }
    }
    let note = cloud.crs_note.clone();
    Ok((PointCloud::new(kept).with_note(note.clone()), PointCloud::new(gone).with_note(note)))
}

/// Cloud with a `removed` flag per point in `source_id` (1 removed, 0 kept),
/// for overlay rendering.
pub fn classified_cloud(cloud: &PointCloud, result: &PruneResult) -> Result<PointCloud> {
    let mut out = cloud.clone();
    for p in &mut out.points {
        p.source_id = Some(0);
    }
    for &i in &result.removed_point_indices {
        out.points
            .get_mut(i)
            .ok_or_else(|| Error::Consistency(format!("removed point index {i} is out of range")))?
            .source_id = Some(1);
    }
    Ok(out)
}
