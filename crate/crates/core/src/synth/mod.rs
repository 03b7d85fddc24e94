//! Synthetic ground truth for the prune simulator: procedural trees, exact
//! pruning at the mesh level, stands of trees on a ground plane, a virtual
//! LiDAR scanner and F1 scoring of predicted removals.

mod benchmark;
mod f1;
mod generate;
mod mesh;
mod scan;
mod stand;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use benchmark::{
    build_case, build_models, evaluate_case, run_benchmark, segment_tree, BenchmarkConfig, BenchmarkReport,
    ModelSet, StandCase, TreeFailure, TreeOutcome,
};
pub use f1::{evaluate_f1, f1_from_masks, should_be_removed, F1Score};
pub use generate::{generate_tree, limb_candidates, SynthParams};
pub use mesh::{mesh_prune, PrunedMesh, Segment, SegmentKind, TreeMesh, ATTACH_TOLERANCE};
pub use scan::{virtual_scan, GroundPlane, PlacedTree, ScanCloud, ScanConfig, Scene};
pub use stand::{build_stand, build_stand_ordered, nearest_tree, row_sensors, scan_single_tree, stand_order, GROUND_MARGIN};

use crate::Vec3;

/// Scans of one tree's stand before and after its cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPair {
    pub reference_scan: ScanCloud,
    pub pruned_scan: ScanCloud,
    pub removed_segment_ids: BTreeSet<u32>,
    pub cut_points: Vec<Vec3>,
}

/// Derives an independent seed from a base seed and a stream index.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
