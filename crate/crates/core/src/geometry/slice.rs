use std::collections::{BTreeMap, VecDeque};

use super::voxel::{CellIndex, VoxelGrid};

/// Connected components of the cells whose centroid height lies in
/// `[z_lo, z_hi)`. Connectivity is 8-neighbour in the horizontal index
/// plane; cells sharing a column within the slice always belong together.
///
/// Each component is sorted, and components are ordered by their smallest
/// cell. An empty or inverted range yields no components.
pub fn slice_components(grid: &VoxelGrid, z_lo: f64, z_hi: f64) -> Vec<Vec<CellIndex>> {
    if !(z_lo < z_hi) {
        return Vec::new();
    }
    horizontal_components(
        grid.cells
            .values()
            .filter(|c| c.centroid.z >= z_lo && c.centroid.z < z_hi)
            .map(|c| c.index),
    )
}

/// 8-connected components of a set of cells projected onto the horizontal
/// index plane.
pub(crate) fn horizontal_components(cells: impl IntoIterator<Item = CellIndex>) -> Vec<Vec<CellIndex>> {
    let mut columns: BTreeMap<(i64, i64), Vec<CellIndex>> = BTreeMap::new();
    for index in cells {
        columns.entry(index.column()).or_default().push(index);
    }

    let mut visited: BTreeMap<(i64, i64), bool> = columns.keys().map(|&k| (k, false)).collect();
    let mut components = Vec::new();
    for &start in columns.keys() {
        if visited[&start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        visited.insert(start, true);
        while let Some((x, y)) = queue.pop_front() {
            members.extend_from_slice(&columns[&(x, y)]);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let n = (x + dx, y + dy);
                    if let Some(seen) = visited.get_mut(&n) {
                        if !*seen {
                            *seen = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        members.sort();
        components.push(members);
    }
    components.sort();
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{voxelize, Label, LabeledPoint, PointCloud};
    use proptest::prelude::*;

    fn grid_of(cells: &[(i64, i64, i64)]) -> VoxelGrid {
        let s = 0.25;
        let cloud: PointCloud = cells
            .iter()
            .map(|&(x, y, z)| {
                LabeledPoint::new((x as f64 + 0.5) * s, (y as f64 + 0.5) * s, (z as f64 + 0.5) * s, Label::Unknown)
            })
            .collect();
        voxelize(&cloud, s).unwrap()
    }

    #[test]
    fn adjacent_cells_join() {
        let g = grid_of(&[(0, 0, 0), (1, 0, 0)]);
        assert_eq!(slice_components(&g, 0.0, 0.25).len(), 1);
    }

    #[test]
    fn diagonal_cells_join() {
        let g = grid_of(&[(0, 0, 0), (1, 1, 0)]);
        assert_eq!(slice_components(&g, 0.0, 0.25).len(), 1);
    }

    #[test]
    fn gap_column_splits() {
        let g = grid_of(&[(0, 0, 0), (2, 0, 0)]);
        assert_eq!(slice_components(&g, 0.0, 0.25).len(), 2);
    }

    #[test]
    fn block_is_one_component() {
        let cells: Vec<_> = (0..4).flat_map(|x| (0..4).map(move |y| (x, y, 0))).collect();
        let comps = slice_components(&grid_of(&cells), 0.0, 0.25);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 16);
    }

    #[test]
    fn empty_and_inverted_ranges() {
        let g = grid_of(&[(0, 0, 0)]);
        assert!(slice_components(&g, 5.0, 6.0).is_empty());
        assert!(slice_components(&g, 1.0, 0.0).is_empty());
    }

    #[test]
    fn stacked_cells_in_one_slice_join() {
        let g = grid_of(&[(0, 0, 0), (0, 0, 1), (5, 5, 1)]);
        let comps = slice_components(&g, 0.0, 0.5);
        assert_eq!(comps, vec![vec![CellIndex::new(0, 0, 0), CellIndex::new(0, 0, 1)], vec![CellIndex::new(5, 5, 1)]]);
    }

    proptest! {
        #[test]
        fn components_partition_the_slice(
            cells in prop::collection::btree_set((-6i64..6, -6i64..6, 0i64..4), 1..80),
            lo in 0.0f64..0.6, width in 0.05f64..1.0,
        ) {
            let cells: Vec<_> = cells.into_iter().collect();
            let g = grid_of(&cells);
            let comps = slice_components(&g, lo, lo + width);
            let mut all: Vec<CellIndex> = comps.iter().flatten().copied().collect();
            let n = all.len();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            let expected: Vec<CellIndex> = g.cells.values()
                .filter(|c| c.centroid.z >= lo && c.centroid.z < lo + width)
                .map(|c| c.index)
                .collect();
            prop_assert_eq!(all, expected);
        }
    }
}
