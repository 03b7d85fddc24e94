//! Tree volume, total light, comparison-set normalization and the combined
//! score `S = α·D + β·Ṽ + γ·L̃`.
//!
//! Scores are relative: Ṽ and L̃ only mean something inside the comparison
//! set they were normalized over, so there is no function that scores a
//! single tree in isolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_components, hull_area_2d, CellIndex, VoxelGrid};
use crate::light::LightField;

pub const DEFAULT_SLICE_HEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            alpha: 1.6,
            beta: 0.8,
            gamma: 0.3,
        }
    }
}

/// Raw, un-normalized measurements of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeMeasurement {
    #[serde(rename = "D")]
    pub d: f64,
    pub volume: f64,
    pub total_light: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub volume: f64,
    pub total_light: f64,
    pub v_norm: f64,
    pub l_norm: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub coefficients: Coefficients,
}

impl ScoreReport {
    pub fn new(raw: TreeMeasurement, v_norm: f64, l_norm: f64, coefficients: Coefficients) -> Self {
        Self {
            d: raw.d,
            volume: raw.volume,
            total_light: raw.total_light,
            v_norm,
            l_norm,
            s: combined_score(raw.d, v_norm, l_norm, &coefficients),
            coefficients,
        }
    }
}

/// Canopy volume as the sum over horizontal slices of each connected
/// component's footprint times the slice height.
///
/// Slices are anchored at multiples of `slice_height` above the grid origin,
/// so a pruned copy of a tree is sliced identically to the original. A
/// component's footprint is the convex-hull area of its cell centroids;
/// when that hull is degenerate (one cell, or a straight line of cells) the
/// component contributes `voxel_size²` per occupied column instead.
pub fn tree_volume(grid: &VoxelGrid, slice_height: f64) -> Result<f64> {
    if !(slice_height > 0.0 && slice_height.is_finite()) {
        return Err(Error::param("slice_height", format!("must be positive, got {slice_height}")));
    }
    if grid.is_empty() {
        return Err(Error::param("grid", "cannot measure the volume of an empty grid"));
    }
    let mut slices: BTreeMap<i64, Vec<CellIndex>> = BTreeMap::new();
    for cell in grid.cells.values() {
        let k = ((cell.centroid.z - grid.origin.z) / slice_height).floor() as i64;
        slices.entry(k).or_default().push(cell.index);
    }
    let cell_area = grid.voxel_size * grid.voxel_size;
    let mut volume = 0.0;
    for cells in slices.into_values() {
        for component in horizontal_components(cells) {
            let footprint: Vec<[f64; 2]> = component
                .iter()
                .map(|idx| {
                    let c = grid.cells[idx].centroid;
                    [c.x, c.y]
                })
                .collect();
            let area = hull_area_2d(&footprint);
            let area = if area > 0.0 {
                area
            } else {
                let mut columns: Vec<(i64, i64)> = component.iter().map(|c| c.column()).collect();
                columns.dedup();
                columns.sort_unstable();
                columns.dedup();
                cell_area * columns.len() as f64
            };
            volume += area * slice_height;
        }
    }
    Ok(volume)
}

pub fn total_light(field: &LightField) -> f64 {
    field.total_absorbed()
}

/// Divides every value by the largest one.
pub fn normalize_set(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::param("values", "comparison set is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::param("values", format!("{v} is not a positive finite value")));
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    Ok(values.iter().map(|v| v / max).collect())
}

pub fn combined_score(d: f64, v_norm: f64, l_norm: f64, c: &Coefficients) -> f64 {
    c.alpha * d + c.beta * v_norm + c.gamma * l_norm
}

/// Normalizes a comparison set and scores every member.
pub fn score_set(set: &[TreeMeasurement], coefficients: Coefficients) -> Result<Vec<ScoreReport>> {
    let volumes: Vec<f64> = set.iter().map(|m| m.volume).collect();
    let lights: Vec<f64> = set.iter().map(|m| m.total_light).collect();
    let v = normalize_set(&volumes)?;
    let l = normalize_set(&lights)?;
    Ok(set
        .iter()
        .zip(v.into_iter().zip(l))
        .map(|(m, (v, l))| ScoreReport::new(*m, v, l, coefficients))
        .collect())
}

/// Relative change in percent.
pub fn percent_change(value: f64, baseline: f64) -> f64 {
    (value - baseline) / baseline.abs() * 100.0
}
