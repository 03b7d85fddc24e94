use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mesh::TreeMesh;
use super::scan::{GroundPlane, PlacedTree, Scene};
use crate::error::{Error, Result};
use crate::Vec3;

/// How far the ground plane reaches past the outer trees.
pub const GROUND_MARGIN: f64 = 8.0;

/// Slot order for a stand of `n` trees, shuffled by `order_seed`.
pub fn stand_order(n: usize, order_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
    order
}

/// Places the meshes in a row along x, `spacing` apart and centred on the
/// origin, in an order shuffled by `order_seed`, on a ground plane at z = 0.
/// Slot `i` gets tree id `i`; `model` records which input mesh it holds.
pub fn build_stand(meshes: &[TreeMesh], spacing: f64, order_seed: u64) -> Result<Scene> {
    build_stand_ordered(meshes, spacing, &stand_order(meshes.len(), order_seed))
}

/// [`build_stand`] with an explicit slot order.
pub fn build_stand_ordered(meshes: &[TreeMesh], spacing: f64, order: &[usize]) -> Result<Scene> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
    }
    if meshes.is_empty() {
        return Err(Error::param("meshes", "a stand needs at least one tree"));
    }
    let offset = (meshes.len() - 1) as f64 / 2.0;
    let trees: Vec<PlacedTree> = order
        .iter()
        .enumerate()
        .map(|(slot, &model)| {
            let origin = Vec3::new((slot as f64 - offset) * spacing, 0.0, 0.0);
            PlacedTree {
                tree_id: slot as u32,
                model,
                origin,
                mesh: meshes[model].translated(origin),
            }
        })
        .collect();
    let half = offset * spacing + GROUND_MARGIN;
    Ok(Scene {
        trees,
        ground: Some(GroundPlane {
            z: 0.0,
            min: [-half, -GROUND_MARGIN],
            max: [half, GROUND_MARGIN],
        }),
    })
}

/// Sensor stops on both sides of the row, level with each tree.
pub fn row_sensors(scene: &Scene, distance: f64, height: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for side in [-1.0, 1.0] {
        for t in &scene.trees {
            out.push(Vec3::new(t.origin.x, side * distance, height));
        }
    }
    out
}

/// Index of the tree whose origin is nearest in x, a stand-in for
/// per-tree segmentation of a row scan.
pub fn nearest_tree(scene: &Scene, x: f64) -> Option<usize> {
    scene
        .trees
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.origin.x - x).abs().total_cmp(&(b.1.origin.x - x).abs()).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Scans one tree from four sides and returns the tree's points without
/// the ground, for use as a stand-alone synthetic cloud.
pub fn scan_single_tree(mesh: &TreeMesh, scan: &super::scan::ScanConfig, distance: f64, height: f64) -> Result<crate::geometry::PointCloud> {
    let scene = build_stand_ordered(std::slice::from_ref(mesh), 1.0, &[0])?;
    let sensors = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
        .into_iter()
        .map(|(x, y)| Vec3::new(x * distance, y * distance, height))
        .collect();
    let config = super::scan::ScanConfig {
        sensor_positions: sensors,
        ..scan.clone()
    };
    let out = super::scan::virtual_scan(&scene, &config)?;
    Ok(out.cloud.points.into_iter().filter(|p| p.source_id.is_some()).collect::<crate::geometry::PointCloud>().with_note("synthetic tree scan"))
}
