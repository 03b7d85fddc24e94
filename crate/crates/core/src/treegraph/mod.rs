//! Voxel-centroid graph, trunk detection, shortest paths to the trunk and
//! prune simulation.
//!
//! A node is pruned when its shortest path to the trunk passes through a
//! cut node; the classification is then propagated to every point of the
//! node's voxel.

mod graph;
mod paths;
mod prune;

pub use graph::{find_trunk, GraphNode, TreeGraph, TRUNK_SEARCH_RADIUS};
pub use paths::{astar, shortest_paths, PathMap};
pub use prune::{apply_prune, classified_cloud, removed_by_cut_nodes, simulate_prune, CutSpec, PruneResult, PruneSummary};

/// Neighbour radius as a multiple of the voxel size; covers the full
/// 26-neighbourhood (√3 ≈ 1.73) with slack for centroid offsets.
pub const NEIGHBOR_RADIUS_FACTOR: f64 = 1.8;
/// Cut radius as a multiple of the voxel size.
pub const CUT_RADIUS_FACTOR: f64 = 2.0;
