use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::Vec3;

pub const DEFAULT_VOXEL_SIZE: f64 = 0.25;

/// Integer voxel coordinate `(ix, iy, iz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

impl CellIndex {
    pub const fn new(ix: i64, iy: i64, iz: i64) -> Self {
        Self { ix, iy, iz }
    }

    pub fn offset(self, dx: i64, dy: i64, dz: i64) -> Self {
        Self::new(self.ix + dx, self.iy + dy, self.iz + dz)
    }

    pub fn column(self) -> (i64, i64) {
        (self.ix, self.iy)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.ix, self.iy, self.iz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelCell {
    pub index: CellIndex,
    pub centroid: Vec3,
    pub point_indices: Vec<usize>,
}

impl VoxelCell {
    pub fn count(&self) -> usize {
        self.point_indices.len()
    }
}

/// Sparse occupancy grid. Cells are kept in index order so every traversal
/// of the grid is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub origin: Vec3,
    pub cells: BTreeMap<CellIndex, VoxelCell>,
}

impl VoxelGrid {
    pub fn empty(voxel_size: f64, origin: Vec3) -> Self {
        Self {
            voxel_size,
            origin,
            cells: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, index: &CellIndex) -> Option<&VoxelCell> {
        self.cells.get(index)
    }

    pub fn contains(&self, index: &CellIndex) -> bool {
        self.cells.contains_key(index)
    }

    pub fn index_of(&self, p: &Vec3) -> CellIndex {
        let rel = (p - self.origin) / self.voxel_size;
        CellIndex::new(rel.x.floor() as i64, rel.y.floor() as i64, rel.z.floor() as i64)
    }

    /// Lower corner of a cell in world coordinates.
    pub fn cell_min(&self, index: CellIndex) -> Vec3 {
        self.origin + Vec3::new(index.ix as f64, index.iy as f64, index.iz as f64) * self.voxel_size
    }

    pub fn cell_center(&self, index: CellIndex) -> Vec3 {
        self.cell_min(index) + Vec3::repeat(self.voxel_size / 2.0)
    }

    /// Inclusive index bounds over occupied cells.
    pub fn index_bounds(&self) -> Option<(CellIndex, CellIndex)> {
        let mut it = self.cells.keys();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), c| {
            (
                CellIndex::new(lo.ix.min(c.ix), lo.iy.min(c.iy), lo.iz.min(c.iz)),
                CellIndex::new(hi.ix.max(c.ix), hi.iy.max(c.iy), hi.iz.max(c.iz)),
            )
        }))
    }

    /// World-space bounds of the occupied cells (outer faces).
    pub fn world_bounds(&self) -> Option<(Vec3, Vec3)> {
        let (lo, hi) = self.index_bounds()?;
        Some((
            self.cell_min(lo),
            self.cell_min(hi) + Vec3::repeat(self.voxel_size),
        ))
    }

    /// A copy of the grid without the listed cells.
    pub fn without(&self, removed: impl IntoIterator<Item = CellIndex>) -> VoxelGrid {
        let mut out = self.clone();
        for c in removed {
            out.cells.remove(&c);
        }
        out
    }
}

/// Voxelizes with the grid anchored at the world origin, so cell indices are
/// stable across clouds that share a frame (e.g. a tree and its pruned copy).
pub fn voxelize(cloud: &PointCloud, voxel_size: f64) -> Result<VoxelGrid> {
    voxelize_with_origin(cloud, voxel_size, Vec3::zeros())
}

pub fn voxelize_with_origin(cloud: &PointCloud, voxel_size: f64, origin: Vec3) -> Result<VoxelGrid> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::param("voxel_size", format!("must be positive, got {voxel_size}")));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut grid = VoxelGrid::empty(voxel_size, origin);
    let mut sums: BTreeMap<CellIndex, Vec3> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::param("cloud", format!("point {i} has a non-finite coordinate")));
        }
        let pos = p.position();
        let idx = grid.index_of(&pos);
        *sums.entry(idx).or_insert_with(Vec3::zeros) += pos;
        grid.cells
            .entry(idx)
            .or_insert_with(|| VoxelCell {
                index: idx,
                centroid: Vec3::zeros(),
                point_indices: Vec::new(),
            })
            .point_indices
            .push(i);
    }
    for (idx, cell) in grid.cells.iter_mut() {
        let mean = sums[idx] / cell.count() as f64;
        // Keep the centroid inside its cell even when rounding nudges it out.
        let lo = origin + Vec3::new(idx.ix as f64, idx.iy as f64, idx.iz as f64) * voxel_size;
        let hi = lo + Vec3::repeat(voxel_size);
        cell.centroid = mean.sup(&lo).inf(&hi);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Label, LabeledPoint};
    use proptest::prelude::*;

    fn cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
        pts.iter().map(|&(x, y, z)| LabeledPoint::new(x, y, z, Label::Unknown)).collect()
    }

    #[test]
    fn two_points_share_a_coarse_cell() {
        let grid = voxelize(&cloud(&[(0.0, 0.0, 0.0), (0.1, 0.0, 0.0)]), 0.25).unwrap();
        assert_eq!(grid.len(), 1);
        let cell = grid.get(&CellIndex::new(0, 0, 0)).unwrap();
        assert_eq!(cell.count(), 2);
        assert!((cell.centroid - Vec3::new(0.05, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_points_split_on_a_fine_grid() {
        let grid = voxelize(&cloud(&[(0.0, 0.0, 0.0), (0.1, 0.0, 0.0)]), 0.05).unwrap();
        assert_eq!(grid.len(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        let c = cloud(&[(0.0, 0.0, 0.0)]);
        assert!(matches!(voxelize(&c, 0.0), Err(Error::Parameter { .. })));
        assert!(matches!(voxelize(&c, -1.0), Err(Error::Parameter { .. })));
        assert!(matches!(voxelize(&PointCloud::default(), 0.25), Err(Error::EmptyCloud)));
    }

    #[test]
    fn negative_coordinates_floor_downwards() {
        let grid = voxelize(&cloud(&[(-0.01, -0.26, 0.0)]), 0.25).unwrap();
        assert!(grid.contains(&CellIndex::new(-1, -2, 0)));
    }

    #[test]
    fn large_cloud_is_partitioned() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..100_000)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..5.0)))
            .collect();
        let grid = voxelize(&cloud(&pts), 0.25).unwrap();
        let total: usize = grid.cells.values().map(VoxelCell::count).sum();
        assert_eq!(total, 100_000);
    }

    proptest! {
        #[test]
        fn voxelization_is_a_partition(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..300),
            size in 0.01f64..2.0,
        ) {
            let c = cloud(&pts);
            let grid = voxelize(&c, size).unwrap();
            prop_assert!(grid.len() <= c.len());
            let mut seen = vec![false; c.len()];
            for (idx, cell) in &grid.cells {
                prop_assert!(cell.count() >= 1);
                prop_assert_eq!(*idx, cell.index);
                let lo = grid.cell_min(*idx);
                let hi = lo + Vec3::repeat(size);
                for k in 0..3 {
                    prop_assert!(cell.centroid[k] >= lo[k] && cell.centroid[k] <= hi[k]);
                }
                for &i in &cell.point_indices {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                    prop_assert_eq!(grid.index_of(&c.points[i].position()), *idx);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn integer_translations_shift_indices(
            pts in prop::collection::vec((-4096i32..4096, -4096i32..4096, -4096i32..4096), 1..100),
            shift in (-20i64..20, -20i64..20, -20i64..20),
        ) {
            // Dyadic coordinates keep the translation exact in floating point.
            let size = 0.25;
            let c = cloud(&pts.iter().map(|&(x, y, z)| (x as f64 / 1024.0, y as f64 / 1024.0, z as f64 / 1024.0)).collect::<Vec<_>>());
            let moved = c.translated(Vec3::new(shift.0 as f64, shift.1 as f64, shift.2 as f64) * size);
            let a = voxelize(&c, size).unwrap();
            let b = voxelize(&moved, size).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (idx, cell) in &a.cells {
                let other = b.get(&idx.offset(shift.0, shift.1, shift.2));
                prop_assert!(other.is_some());
                prop_assert_eq!(other.unwrap().count(), cell.count());
            }
        }
    }
}
