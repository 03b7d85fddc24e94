use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, Label, PointCloud, VoxelGrid};
use crate::spatial::SpatialHash;
use crate::Vec3;

/// Horizontal distance from the cloud's centroid within which an unlabeled
/// trunk base is searched for.
pub const TRUNK_SEARCH_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub centroid: Vec3,
    pub cell: CellIndex,
    pub point_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGraph {
    pub nodes: Vec<GraphNode>,
    /// Neighbours of each node with Euclidean edge lengths, sorted by id.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub trunk: usize,
    pub neighbor_radius: f64,
    /// Edge weights are centroid distances, so straight-line distance is an
    /// admissible A* heuristic.
    pub geometric: bool,
}

impl TreeGraph {
    /// Builds the radius graph over the grid's voxel centroids (one node per
    /// cell, in cell order) and picks the trunk with [`find_trunk`].
    pub fn build(grid: &VoxelGrid, cloud: &PointCloud, neighbor_radius: f64) -> Result<Self> {
        let mut graph = Self::build_untrunked(grid, neighbor_radius)?;
        graph.trunk = find_trunk(&graph, cloud);
        Ok(graph)
    }

    /// Like [`TreeGraph::build`] but with the trunk pinned to the node
    /// nearest `trunk_at`. Used when re-building graphs for pruned copies of
    /// a tree so the trunk does not move between variants.
    pub fn build_with_trunk_at(grid: &VoxelGrid, neighbor_radius: f64, trunk_at: Vec3) -> Result<Self> {
        let mut graph = Self::build_untrunked(grid, neighbor_radius)?;
        graph.trunk = graph.nearest_node(&trunk_at);
        Ok(graph)
    }

    fn build_untrunked(grid: &VoxelGrid, neighbor_radius: f64) -> Result<Self> {
        if !(neighbor_radius > 0.0 && neighbor_radius.is_finite()) {
            return Err(Error::param("neighbor_radius", format!("must be positive, got {neighbor_radius}")));
        }
        if grid.is_empty() {
            return Err(Error::param("grid", "cannot build a graph over an empty grid"));
        }
        let nodes: Vec<GraphNode> = grid
            .cells
            .values()
            .enumerate()
            .map(|(id, c)| GraphNode {
                id,
                centroid: c.centroid,
                cell: c.index,
                point_indices: c.point_indices.clone(),
            })
            .collect();
        let hash = SpatialHash::new(nodes.iter().map(|n| n.centroid).collect(), neighbor_radius);
        let adjacency = nodes
            .iter()
            .map(|n| {
                hash.within(&n.centroid, neighbor_radius)
                    .into_iter()
                    .filter(|&m| m != n.id)
                    .map(|m| (m, (nodes[m].centroid - n.centroid).norm().max(f64::MIN_POSITIVE)))
                    .collect()
            })
            .collect();
        Ok(TreeGraph {
            nodes,
            adjacency,
            trunk: 0,
            neighbor_radius,
            geometric: true,
        })
    }

    /// A graph with explicit weighted edges. Node positions are only used
    /// for cut matching; the A* heuristic is disabled.
    pub fn from_edges(positions: Vec<Vec3>, edges: &[(usize, usize, f64)], trunk: usize) -> Result<Self> {
        let n = positions.len();
        if trunk >= n {
            return Err(Error::param("trunk", format!("node {trunk} does not exist")));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::param("edges", format!("invalid edge ({a}, {b})")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::param("edges", format!("edge ({a}, {b}) has weight {w}")));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by(|x: &(usize, f64), y| x.0.cmp(&y.0));
            list.dedup_by_key(|e| e.0);
        }
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(id, centroid)| GraphNode {
                id,
                centroid,
                cell: CellIndex::new(id as i64, 0, 0),
                point_indices: vec![id],
            })
            .collect();
        Ok(TreeGraph {
            nodes,
            adjacency,
            trunk,
            neighbor_radius: 0.0,
            geometric: false,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .binary_search_by_key(&b, |e| e.0)
            .ok()
            .map(|i| self.adjacency[a][i].1)
    }

    /// Nearest node by centroid distance; ties go to the smaller id.
    pub fn nearest_node(&self, p: &Vec3) -> usize {
        self.nodes
            .iter()
            .map(|n| (n.id, (n.centroid - p).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(id, _)| id)
            .unwrap_or(0)
    }

    pub fn trunk_position(&self) -> Vec3 {
        self.nodes[self.trunk].centroid
    }
}

fn lowest(graph: &TreeGraph, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    candidates.min_by(|&a, &b| {
        graph.nodes[a].centroid.z.total_cmp(&graph.nodes[b].centroid.z).then(a.cmp(&b))
    })
}

/// Picks the trunk node:
///
/// 1. the node holding the lowest trunk-labelled point, if any;
/// 2. else the lowest node within [`TRUNK_SEARCH_RADIUS`] (horizontally) of
///    the cloud's horizontal centroid;
/// 3. else the lowest node.
pub fn find_trunk(graph: &TreeGraph, cloud: &PointCloud) -> usize {
    let mut owner = vec![usize::MAX; cloud.len()];
    for n in &graph.nodes {
        for &i in &n.point_indices {
            if i < owner.len() {
                owner[i] = n.id;
            }
        }
    }

    let lowest_trunk_point = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(i, p)| p.label == Label::Trunk && owner[*i] != usize::MAX)
        .min_by(|a, b| a.1.z.total_cmp(&b.1.z).then(a.0.cmp(&b.0)));
    if let Some((i, _)) = lowest_trunk_point {
        return owner[i];
    }

    if !cloud.is_empty() {
        let n = cloud.len() as f64;
        let cx = cloud.points.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = cloud.points.iter().map(|p| p.y).sum::<f64>() / n;
        let central = graph.nodes.iter().filter(|node| {
            let dx = node.centroid.x - cx;
            let dy = node.centroid.y - cy;
            (dx * dx + dy * dy).sqrt() <= TRUNK_SEARCH_RADIUS
        });
        if let Some(id) = lowest(graph, central.map(|n| n.id)) {
            return id;
        }
    }
    lowest(graph, 0..graph.len()).unwrap_or(0)
}
