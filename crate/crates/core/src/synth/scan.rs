use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{SegmentKind, TreeMesh};
use crate::error::{Error, Result};
use crate::geometry::{Label, LabeledPoint, PointCloud};
use crate::Vec3;

const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedTree {
    /// Provenance tag written to every point scanned off this tree.
    pub tree_id: u32,
    /// Which generated model this is, before any pruning.
    pub model: usize,
    pub origin: Vec3,
    /// Mesh in world coordinates.
    pub mesh: TreeMesh,
}

/// Horizontal rectangle at height `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub z: f64,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub trees: Vec<PlacedTree>,
    pub ground: Option<GroundPlane>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub sensor_positions: Vec<Vec3>,
    /// Angular step between rays in both azimuth and elevation, degrees.
    pub angular_resolution: f64,
    pub noise_sigma: f64,
    pub max_range: f64,
    /// Elevation band swept by each sensor, degrees above horizontal.
    pub elevation_range: [f64; 2],
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            sensor_positions: Vec::new(),
            angular_resolution: 0.3,
            noise_sigma: 0.01,
            max_range: 30.0,
            elevation_range: [-30.0, 80.0],
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angular_resolution > 0.0) {
            return Err(Error::param("angular_resolution", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::param("noise_sigma", "must be non-negative"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::param("max_range", "must be positive"));
        }
        let [lo, hi] = self.elevation_range;
        if !(-90.0..=90.0).contains(&lo) || !(lo..=90.0).contains(&hi) {
            return Err(Error::param("elevation_range", format!("invalid range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// A scanned cloud with the segment each point came from. Tree ids live in
/// each point's `source_id`; ground points carry neither tag.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanCloud {
    pub cloud: PointCloud,
    pub segment_ids: Vec<Option<u32>>,
}

impl ScanCloud {
    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// CSV with `tree_id,segment_id` provenance columns; -1 marks ground.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("x,y,z,label,tree_id,segment_id\n");
        for (p, s) in self.cloud.points.iter().zip(&self.segment_ids) {
            let tag = |v: Option<u32>| v.map_or("-1".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{}", p.x, p.y, p.z, p.label, tag(p.source_id), tag(*s));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Cylinder { a: Vec3, axis: Vec3, height: f64, radius: f64 },
    Disc { center: Vec3, normal: Vec3, radius: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Primitive {
    shape: Shape,
    tree_id: u32,
    segment_id: u32,
    label: Label,
}

fn disc_hit(o: Vec3, d: Vec3, center: Vec3, normal: Vec3, radius: f64) -> Option<f64> {
    let denom = d.dot(&normal);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (center - o).dot(&normal) / denom;
    if t <= HIT_EPS {
        return None;
    }
    ((o + d * t - center).norm_squared() <= radius * radius).then_some(t)
}

impl Shape {
    fn intersect(&self, o: Vec3, d: Vec3) -> Option<f64> {
        match *self {
            Shape::Disc { center, normal, radius } => disc_hit(o, d, center, normal, radius),
            Shape::Cylinder { a, axis, height, radius } => {
                let mut best: Option<f64> = None;
                let mut take = |t: f64| {
                    if t > HIT_EPS && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                let rel = o - a;
                let dp = d - axis * d.dot(&axis);
                let op = rel - axis * rel.dot(&axis);
                let qa = dp.norm_squared();
                if qa > 1e-18 {
                    let qb = 2.0 * op.dot(&dp);
                    let qc = op.norm_squared() - radius * radius;
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                            let h = (rel + d * t).dot(&axis);
                            if (0.0..=height).contains(&h) {
                                take(t);
                            }
                        }
                    }
                }
                if let Some(t) = disc_hit(o, d, a, axis, radius) {
                    take(t);
                }
                if let Some(t) = disc_hit(o, d, a + axis * height, axis, radius) {
                    take(t);
                }
                best
            }
        }
    }

    fn bounds(&self) -> Aabb {
        // Bounding box of a disc of `radius` with normal `n` centred at `c`.
        let disc = |c: Vec3, n: Vec3, r: f64| {
            let ext = Vec3::new(
                r * (1.0 - n.x * n.x).max(0.0).sqrt(),
                r * (1.0 - n.y * n.y).max(0.0).sqrt(),
                r * (1.0 - n.z * n.z).max(0.0).sqrt(),
            );
            Aabb { min: c - ext, max: c + ext }
        };
        match *self {
            Shape::Disc { center, normal, radius } => disc(center, normal, radius),
            Shape::Cylinder { a, axis, height, radius } => {
                disc(a, axis, radius).union(&disc(a + axis * height, axis, radius))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    /// Entry distance of the ray if it meets the box before `t_max`.
    fn hit(&self, o: Vec3, inv: Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - o[k]) * inv[k];
            let b = (self.max[k] - o[k]) * inv[k];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: primitive range. Inner: `start` is the left child, `count` 0.
    start: usize,
    count: usize,
    right: usize,
}

/// Bounding volume hierarchy over every surface in a scene.
struct Bvh {
    prims: Vec<Primitive>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    fn new(mut prims: Vec<Primitive>) -> Self {
        let mut nodes = Vec::with_capacity(2 * prims.len() / LEAF_SIZE + 1);
        if !prims.is_empty() {
            let n = prims.len();
            Self::build(&mut prims, 0, n, &mut nodes);
        }
        Self { prims, nodes }
    }

    fn build(prims: &mut [Primitive], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
        let bounds = prims[start..end].iter().fold(Aabb::empty(), |b, p| b.union(&p.shape.bounds()));
        let id = nodes.len();
        nodes.push(Node {
            bounds,
            start,
            count: end - start,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let centre = |p: &Primitive| {
            let b = p.shape.bounds();
            (b.min + b.max) / 2.0
        };
        let extent = bounds.max - bounds.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        prims[start..end].select_nth_unstable_by(mid - start, |a, b| centre(a)[axis].total_cmp(&centre(b)[axis]));
        let left = Self::build(prims, start, mid, nodes);
        let right = Self::build(prims, mid, end, nodes);
        nodes[id].start = left;
        nodes[id].count = 0;
        nodes[id].right = right;
        id
    }

    fn first_hit(&self, o: Vec3, d: Vec3, t_max: f64) -> Option<(f64, &Primitive)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best: Option<(f64, &Primitive)> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.hit(o, inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                for p in &self.prims[node.start..node.start + node.count] {
                    if let Some(t) = p.shape.intersect(o, d) {
                        if t < limit {
                            limit = t;
                            best = Some((t, p));
                        }
                    }
                }
            } else {
                let (l, r) = (node.start, node.right);
                let tl = self.nodes[l].bounds.hit(o, inv, limit);
                let tr = self.nodes[r].bounds.hit(o, inv, limit);
                // Visit the nearer child first.
                match (tl, tr) {
                    (Some(a), Some(b)) if a <= b => stack.extend([r, l]),
                    (Some(_), Some(_)) => stack.extend([l, r]),
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }
}

fn primitives(scene: &Scene) -> Vec<Primitive> {
    let mut out = Vec::new();
    for tree in &scene.trees {
        for s in &tree.mesh.segments {
            let label = if s.id == tree.mesh.root {
                Label::Trunk
            } else if s.kind == SegmentKind::Leaf {
                Label::Foliage
            } else {
                Label::Unknown
            };
            let length = s.length();
            if length <= 0.0 {
                continue;
            }
            let axis = (s.end - s.start) / length;
            let shape = match s.kind {
                SegmentKind::Branch => Shape::Cylinder {
                    a: s.start,
                    axis,
                    height: length,
                    radius: s.radius,
                },
                SegmentKind::Leaf => Shape::Disc {
                    center: s.end,
                    normal: axis,
                    radius: tree.mesh.leaf_radius,
                },
            };
            out.push(Primitive {
                shape,
                tree_id: tree.tree_id,
                segment_id: s.id,
                label,
            });
        }
    }
    out
}

fn ground_hit(g: &GroundPlane, o: Vec3, d: Vec3) -> Option<f64> {
    if d.z.abs() < 1e-15 {
        return None;
    }
    let t = (g.z - o.z) / d.z;
    if t <= HIT_EPS {
        return None;
    }
    let p = o + d * t;
    (p.x >= g.min[0] && p.x <= g.max[0] && p.y >= g.min[1] && p.y <= g.max[1]).then_some(t)
}

/// Stable per-ray seed, so rescanning a changed scene with the same config
/// reproduces the noise on every surface both scans share.
fn ray_seed(seed: u64, sensor: usize, ray: u64) -> u64 {
    let mut z = seed ^ (sensor as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ray.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Casts a regular azimuth/elevation ray fan from every sensor and keeps the
/// first surface each ray meets within range, with Gaussian range noise
/// added isotropically.
pub fn virtual_scan(scene: &Scene, config: &ScanConfig) -> Result<ScanCloud> {
    config.validate()?;
    if config.sensor_positions.is_empty() {
        return Err(Error::param("sensor_positions", "at least one sensor is required"));
    }
    let bvh = Bvh::new(primitives(scene));
    let res = config.angular_resolution;
    let n_az = (360.0 / res).floor() as u64;
    let [el_lo, el_hi] = config.elevation_range;
    let n_el = ((el_hi - el_lo) / res).floor() as u64;
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::param("noise_sigma", e.to_string()))?;

    let rows: Vec<(usize, u64)> = (0..config.sensor_positions.len())
        .flat_map(|s| (0..n_el).map(move |e| (s, e)))
        .collect();
    let hits: Vec<Vec<(LabeledPoint, Option<u32>)>> = rows
        .par_iter()
        .map(|&(s, ie)| {
            let o = config.sensor_positions[s];
            let el = (el_lo + (ie as f64 + 0.5) * res).to_radians();
            let mut row = Vec::new();
            for ia in 0..n_az {
                let az = ((ia as f64 + 0.5) * res).to_radians();
                let d = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let tree_hit = bvh.first_hit(o, d, config.max_range);
                let limit = tree_hit.map_or(config.max_range, |h| h.0);
                let ground = scene.ground.as_ref().and_then(|g| ground_hit(g, o, d)).filter(|&t| t < limit);
                let (t, label, tree, segment) = match (ground, tree_hit) {
                    (Some(t), _) => (t, Label::Unknown, None, None),
                    (None, Some((t, p))) => (t, p.label, Some(p.tree_id), Some(p.segment_id)),
                    (None, None) => continue,
                };
                let mut pos = o + d * t;
                if config.noise_sigma > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(ray_seed(config.seed, s, ie * n_az + ia));
                    pos += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                }
                let mut point = LabeledPoint::from_vec(pos, label);
                point.source_id = tree;
                row.push((point, segment));
            }
            row
        })
        .collect();

    let mut out = ScanCloud::default();
    for (p, s) in hits.into_iter().flatten() {
        out.cloud.points.push(p);
        out.segment_ids.push(s);
    }
    out.cloud.crs_note = "virtual scan".into();
    Ok(out)
}
