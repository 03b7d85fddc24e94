//! Uniform hash grid for fixed-radius neighbour queries.

use std::collections::HashMap;

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    points: Vec<Vec3>,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl SpatialHash {
    /// `cell` should be on the order of the query radius.
    pub fn new(points: Vec<Vec3>, cell: f64) -> Self {
        assert!(cell > 0.0, "bucket size must be positive");
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(cell, p)).or_default().push(i);
        }
        Self { cell, points, buckets }
    }

    fn key(cell: f64, p: &Vec3) -> (i64, i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn visit(&self, q: &Vec3, radius: f64, mut f: impl FnMut(usize, f64) -> bool) {
        let reach = (radius / self.cell).ceil() as i64;
        let (kx, ky, kz) = Self::key(self.cell, q);
        let r2 = radius * radius;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &i in bucket {
                            let d2 = (self.points[i] - q).norm_squared();
                            if d2 <= r2 && !f(i, d2) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Indices of every point within `radius` of `q`, ascending.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(q, radius, |i, _| {
            out.push(i);
            true
        });
        out.sort_unstable();
        out
    }

    pub fn any_within(&self, q: &Vec3, radius: f64) -> bool {
        let mut found = false;
        self.visit(q, radius, |_, _| {
            found = true;
            false
        });
        found
    }
}
