//! Point-cloud ingestion, voxelization, slicing and hull utilities.

mod cloud;
pub mod hull;
pub mod io;
mod slice;
mod voxel;

pub use cloud::{Label, LabeledPoint, PointCloud};
pub use hull::{convex_hull, hull_area_2d};
pub use io::{load_cloud, save_cloud, CloudFormat};
pub use slice::slice_components;
pub(crate) use slice::horizontal_components;
pub use voxel::{voxelize, voxelize_with_origin, CellIndex, VoxelCell, VoxelGrid, DEFAULT_VOXEL_SIZE};
