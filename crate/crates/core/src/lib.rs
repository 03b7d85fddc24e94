//! Light-distribution scoring, pruning simulation and cut suggestion for
//! single-tree LiDAR point clouds.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: labeled point clouds, file formats, voxelization, slicing and hulls.
//! - [`light`]: seasonal sky model, voxel raytracing, light fractions and the
//!   distribution score.
//! - [`scoring`]: volume, total light, comparison-set normalization and the combined score.
//! - [`treegraph`]: voxel-centroid graph, trunk detection, shortest paths and prune simulation.
//! - [`suggest`]: shade scores, path influence, candidate selection and re-scoring.
//! - [`synth`]: procedural trees, mesh pruning, virtual scanning and F1 evaluation.
//! - [`pipeline`]: the end-to-end measurement wiring shared by the CLI and the service.

pub mod config;
pub mod error;
pub mod geometry;
pub mod light;
pub mod pipeline;
pub mod scoring;
pub mod spatial;
pub mod suggest;
pub mod synth;
pub mod treegraph;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use geometry::{CellIndex, Label, LabeledPoint, PointCloud, VoxelCell, VoxelGrid};
pub use light::{DistributionScore, LightField, SkyModel};
pub use scoring::{Coefficients, ScoreReport};
pub use treegraph::{CutSpec, PathMap, PruneResult, TreeGraph};

/// 3D vector in meters.
pub type Vec3 = nalgebra::Vector3<f64>;
