use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sky::{SkyModel, SunSample};
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, VoxelGrid};
use crate::Vec3;

/// Sky samples are reduced in fixed-size chunks so the floating-point
/// summation order never depends on the thread count.
const SAMPLES_PER_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightField {
    /// Energy absorbed per occupied cell, `L_i`.
    pub absorbed: BTreeMap<CellIndex, f64>,
    /// Energy carried by every ray that was cast.
    pub total_emitted: f64,
    /// Energy that left the grid without being absorbed.
    pub escaped: f64,
    /// `L_i / max L`; all zero when nothing absorbed any light.
    pub p: BTreeMap<CellIndex, f64>,
}

impl LightField {
    pub fn total_absorbed(&self) -> f64 {
        self.absorbed.values().sum()
    }

    /// `ix,iy,iz,absorbed,p` rows with a header line.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("ix,iy,iz,absorbed,p\n");
        for (idx, l) in &self.absorbed {
            let _ = writeln!(out, "{},{},{},{},{}", idx.ix, idx.iy, idx.iz, l, self.p.get(idx).copied().unwrap_or(0.0));
        }
        out
    }
}

/// Dense occupancy lookup over the grid's index bounding box.
struct Occupancy {
    lo: [i64; 3],
    dims: [i64; 3],
    slots: Vec<u32>,
}

impl Occupancy {
    const EMPTY: u32 = u32::MAX;

    fn new(grid: &VoxelGrid, lo: CellIndex, hi: CellIndex) -> Self {
        let lo = [lo.ix, lo.iy, lo.iz];
        let dims = [hi.ix - lo[0] + 1, hi.iy - lo[1] + 1, hi.iz - lo[2] + 1];
        let mut slots = vec![Self::EMPTY; (dims[0] * dims[1] * dims[2]) as usize];
        for (slot, idx) in grid.cells.keys().enumerate() {
            let c = [idx.ix - lo[0], idx.iy - lo[1], idx.iz - lo[2]];
            slots[((c[2] * dims[1] + c[1]) * dims[0] + c[0]) as usize] = slot as u32;
        }
        Self { lo, dims, slots }
    }

    #[inline]
    fn get(&self, c: [i64; 3]) -> u32 {
        self.slots[((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize]
    }
}

#[derive(Default)]
struct Tally {
    absorbed: Vec<f64>,
    emitted: f64,
    escaped: f64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            absorbed: vec![0.0; n],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.absorbed.iter_mut().zip(&other.absorbed) {
            *a += b;
        }
        self.emitted += other.emitted;
        self.escaped += other.escaped;
    }
}

/// Orthonormal pair spanning the plane perpendicular to `d`.
fn plane_basis(d: Vec3) -> (Vec3, Vec3) {
    let helper = if d.x.abs() <= d.y.abs() && d.x.abs() <= d.z.abs() {
        Vec3::x()
    } else if d.y.abs() <= d.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u).normalize();
    (u, v)
}

/// Follows one ray through the occupancy grid in index space, absorbing a
/// `kappa` fraction of the remaining energy in each occupied cell. Returns
/// the energy that escapes.
fn trace_ray(occ: &Occupancy, start: Vec3, dir: Vec3, mut energy: f64, kappa: f64, absorbed: &mut [f64]) -> f64 {
    let dims = [occ.dims[0] as f64, occ.dims[1] as f64, occ.dims[2] as f64];
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if dir[k] == 0.0 {
            if start[k] < 0.0 || start[k] > dims[k] {
                return energy;
            }
        } else {
            let a = (0.0 - start[k]) / dir[k];
            let b = (dims[k] - start[k]) / dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 > t1 || t1 < 0.0 {
        return energy;
    }
    let t0 = t0.max(0.0);
    let entry = start + dir * t0;

    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        cell[k] = (entry[k].floor() as i64).clamp(0, occ.dims[k] - 1);
        if dir[k] > 0.0 {
            step[k] = 1;
            t_delta[k] = 1.0 / dir[k];
            t_max[k] = t0 + ((cell[k] + 1) as f64 - entry[k]) / dir[k];
        } else if dir[k] < 0.0 {
            step[k] = -1;
            t_delta[k] = -1.0 / dir[k];
            t_max[k] = t0 + (cell[k] as f64 - entry[k]) / dir[k];
        }
    }

    loop {
        let slot = occ.get(cell);
        if slot != Occupancy::EMPTY {
            let taken = kappa * energy;
            absorbed[slot as usize] += taken;
            energy -= taken;
            if energy <= 0.0 {
                return 0.0;
            }
        }
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= occ.dims[axis] {
            return energy;
        }
        t_max[axis] += t_delta[axis];
    }
}

fn trace_sample(grid: &VoxelGrid, occ: &Occupancy, sample: &SunSample, kappa: f64, spacing: f64, tally: &mut Tally) {
    let d = sample.direction.normalize();
    let (u, v) = plane_basis(d);
    let (lo, hi) = grid.world_bounds().expect("non-empty grid");

    let mut a_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut b_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut t_min = f64::INFINITY;
    for corner in 0..8 {
        let c = Vec3::new(
            if corner & 1 == 0 { lo.x } else { hi.x },
            if corner & 2 == 0 { lo.y } else { hi.y },
            if corner & 4 == 0 { lo.z } else { hi.z },
        );
        let (a, b) = (c.dot(&u), c.dot(&v));
        a_range = (a_range.0.min(a), a_range.1.max(a));
        b_range = (b_range.0.min(b), b_range.1.max(b));
        t_min = t_min.min(c.dot(&d));
    }
    let launch = t_min - grid.voxel_size;
    let ray_energy = sample.weight * spacing * spacing;
    let grid_origin = grid.cell_min(CellIndex::new(occ.lo[0], occ.lo[1], occ.lo[2]));
    let dir_index = d / grid.voxel_size;

    // Ray lattice anchored at multiples of the spacing in plane coordinates.
    let first = |lo: f64| (lo / spacing - 0.5).ceil() as i64;
    let last = |hi: f64| (hi / spacing - 0.5).floor() as i64;
    for i in first(a_range.0)..=last(a_range.1) {
        let a = (i as f64 + 0.5) * spacing;
        for j in first(b_range.0)..=last(b_range.1) {
            let b = (j as f64 + 0.5) * spacing;
            let origin = u * a + v * b + d * launch;
            let start = (origin - grid_origin) / grid.voxel_size;
            tally.emitted += ray_energy;
            tally.escaped += trace_ray(occ, start, dir_index, ray_energy, kappa, &mut tally.absorbed);
        }
    }
}

/// Raytraces every sky sample through the grid as a lattice of parallel
/// rays spaced `ray_spacing` apart.
///
/// Each ray carries `weight × ray_spacing²`. An occupied cell takes `kappa`
/// of whatever energy reaches it. The result is bit-identical for identical
/// inputs regardless of thread count.
pub fn raytrace(grid: &VoxelGrid, sky: &SkyModel, kappa: f64, ray_spacing: f64) -> Result<LightField> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::param("kappa", format!("must be in (0, 1], got {kappa}")));
    }
    if !(ray_spacing > 0.0 && ray_spacing.is_finite()) {
        return Err(Error::param("ray_spacing", format!("must be positive, got {ray_spacing}")));
    }
    if let Some(bad) = sky.samples.iter().find(|s| !(s.direction.z < 0.0) || s.weight < 0.0) {
        return Err(Error::param("sky", format!("sample {:?} is not a downwelling non-negative sample", bad.direction)));
    }
    let Some((lo, hi)) = grid.index_bounds() else {
        let emitted = sky.total_weight();
        return Ok(LightField {
            absorbed: BTreeMap::new(),
            total_emitted: emitted,
            escaped: emitted,
            p: BTreeMap::new(),
        });
    };

    let occ = Occupancy::new(grid, lo, hi);
    let n = grid.len();
    let partials: Vec<Tally> = sky
        .samples
        .par_chunks(SAMPLES_PER_CHUNK)
        .map(|chunk| {
            let mut tally = Tally::new(n);
            for sample in chunk {
                trace_sample(grid, &occ, sample, kappa, ray_spacing, &mut tally);
            }
            tally
        })
        .collect();
    let mut total = Tally::new(n);
    for part in &partials {
        total.merge(part);
    }

    let max = total.absorbed.iter().copied().fold(0.0, f64::max);
    let absorbed: BTreeMap<CellIndex, f64> = grid.cells.keys().copied().zip(total.absorbed.iter().copied()).collect();
    let p = absorbed
        .iter()
        .map(|(&k, &l)| (k, if max > 0.0 { l / max } else { 0.0 }))
        .collect();
    Ok(LightField {
        absorbed,
        total_emitted: total.emitted,
        escaped: total.escaped,
        p,
    })
}
