//! End-to-end measurement: voxelize, raytrace, score.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{voxelize, PointCloud, VoxelGrid};
use crate::light::{distribution_score_with, light_fraction, raytrace, DistributionScore, LightField, SkyModel};
use crate::scoring::{score_set, total_light, tree_volume, ScoreReport, TreeMeasurement};
use crate::treegraph::{apply_prune, shortest_paths, simulate_prune, CutSpec, PathMap, PruneResult, TreeGraph};
use crate::Vec3;

/// Everything computed while scoring one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightAnalysis {
    pub grid: VoxelGrid,
    pub field: LightField,
    pub distribution: DistributionScore,
    pub measurement: TreeMeasurement,
}

pub fn analyze_grid(grid: VoxelGrid, sky: &SkyModel, config: &PipelineConfig) -> Result<LightAnalysis> {
    let field = raytrace(&grid, sky, config.kappa, config.ray_spacing())?;
    let p = light_fraction(&field)?;
    let distribution = distribution_score_with(&p, config.log_base)?;
    let volume = tree_volume(&grid, config.slice_height)?;
    let measurement = TreeMeasurement {
        d: distribution.value,
        volume,
        total_light: total_light(&field),
    };
    Ok(LightAnalysis {
        grid,
        field,
        distribution,
        measurement,
    })
}

pub fn analyze(cloud: &PointCloud, sky: &SkyModel, config: &PipelineConfig) -> Result<LightAnalysis> {
    analyze_grid(voxelize(cloud, config.voxel_size)?, sky, config)
}

pub fn measure(cloud: &PointCloud, config: &PipelineConfig) -> Result<TreeMeasurement> {
    Ok(analyze(cloud, &config.sky()?, config)?.measurement)
}

/// Scores a batch of clouds as one comparison set. Clouds that fail to
/// measure are reported individually and excluded from normalization.
pub fn score_clouds(clouds: &[PointCloud], config: &PipelineConfig) -> Result<Vec<Result<ScoreReport>>> {
    use rayon::prelude::*;
    let sky = config.sky()?;
    let measured: Vec<Result<TreeMeasurement>> = clouds
        .par_iter()
        .map(|c| analyze(c, &sky, config).map(|a| a.measurement))
        .collect();
    let ok: Vec<TreeMeasurement> = measured.iter().filter_map(|m| m.as_ref().ok().copied()).collect();
    let mut reports = if ok.is_empty() {
        Vec::new()
    } else {
        score_set(&ok, config.coefficients)?
    }
    .into_iter();
    Ok(measured
        .into_iter()
        .map(|m| m.map(|_| reports.next().expect("one report per measurement")))
        .collect())
}

/// Graph and shortest paths of a tree, ready for prune simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStructure {
    pub grid: VoxelGrid,
    pub graph: TreeGraph,
    pub paths: PathMap,
}

impl TreeStructure {
    pub fn build(cloud: &PointCloud, config: &PipelineConfig) -> Result<Self> {
        let grid = voxelize(cloud, config.voxel_size)?;
        let graph = TreeGraph::build(&grid, cloud, config.neighbor_radius())?;
        let paths = shortest_paths(&graph);
        Ok(Self { grid, graph, paths })
    }

    /// Same as [`TreeStructure::build`] with the trunk pinned near `trunk_at`.
    pub fn build_with_trunk_at(cloud: &PointCloud, config: &PipelineConfig, trunk_at: Vec3) -> Result<Self> {
        let grid = voxelize(cloud, config.voxel_size)?;
        let graph = TreeGraph::build_with_trunk_at(&grid, config.neighbor_radius(), trunk_at)?;
        let paths = shortest_paths(&graph);
        Ok(Self { grid, graph, paths })
    }

    pub fn trunk_position(&self) -> Vec3 {
        self.graph.trunk_position()
    }

    /// Simulates `cuts` and splits the cloud. A prune that takes the trunk
    /// with it is degenerate.
    pub fn prune(&self, cloud: &PointCloud, cuts: &[CutSpec]) -> Result<(PruneResult, PointCloud, PointCloud)> {
        let result = simulate_prune(&self.graph, &self.paths, cuts)?;
        if result.removed_nodes.contains(&self.graph.trunk) {
            return Err(Error::DegeneratePrune);
        }
        let (kept, removed) = apply_prune(cloud, &result)?;
        if kept.is_empty() {
            return Err(Error::DegeneratePrune);
        }
        Ok((result, kept, removed))
    }
}
