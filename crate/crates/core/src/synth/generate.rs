use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mesh::{Segment, SegmentKind, TreeMesh};
use crate::error::{Error, Result};
use crate::Vec3;

/// Recursive branching model. Lengths are in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Branching levels above the trunk.
    pub depth: u32,
    /// Inclusive range of children per branch tip.
    pub branches_per_node: [u32; 2],
    /// Inclusive range of child angles away from the parent direction.
    pub branch_angle: [f64; 2],
    /// Child length over parent length.
    pub length_decay: f64,
    /// Leaves per meter of terminal branch.
    pub leaf_density: f64,
    pub trunk_height: f64,
    pub seed: u64,
    pub trunk_radius: f64,
    /// Child radius over parent radius.
    pub radius_decay: f64,
    /// Length of the first-order limbs.
    pub limb_length: f64,
    /// Pull of every branch direction toward vertical.
    pub tropism: f64,
    pub leaf_radius: f64,
    pub petiole_length: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            depth: 5,
            branches_per_node: [2, 3],
            branch_angle: [35.0, 60.0],
            length_decay: 0.75,
            leaf_density: 40.0,
            trunk_height: 0.9,
            seed: 0,
            trunk_radius: 0.12,
            radius_decay: 0.65,
            limb_length: 1.6,
            tropism: 0.25,
            leaf_radius: 0.06,
            petiole_length: 0.04,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::param("depth", "must be at least 1"));
        }
        let [lo, hi] = self.branches_per_node;
        if lo < 1 || lo > hi {
            return Err(Error::param("branches_per_node", format!("invalid range [{lo}, {hi}]")));
        }
        let [a, b] = self.branch_angle;
        if !(0.0..=180.0).contains(&a) || !(a..=180.0).contains(&b) {
            return Err(Error::param("branch_angle", format!("invalid range [{a}, {b}]")));
        }
        if !(self.length_decay > 0.0 && self.length_decay <= 1.0) {
            return Err(Error::param("length_decay", "must be in (0, 1]"));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay <= 1.0) {
            return Err(Error::param("radius_decay", "must be in (0, 1]"));
        }
        if !(self.leaf_density >= 0.0) {
            return Err(Error::param("leaf_density", "must be non-negative"));
        }
        for (name, v) in [
            ("trunk_height", self.trunk_height),
            ("trunk_radius", self.trunk_radius),
            ("limb_length", self.limb_length),
            ("leaf_radius", self.leaf_radius),
            ("petiole_length", self.petiole_length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !(self.tropism >= 0.0) {
            return Err(Error::param("tropism", "must be non-negative"));
        }
        Ok(())
    }
}

/// Any unit vector perpendicular to `v`.
fn perpendicular(v: Vec3) -> Vec3 {
    let helper = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&helper).normalize()
}

/// `dir` tilted by `angle` radians toward azimuth `phi` around it.
fn tilt(dir: Vec3, angle: f64, phi: f64) -> Vec3 {
    let u = perpendicular(dir);
    let w = dir.cross(&u);
    (dir * angle.cos() + (u * phi.cos() + w * phi.sin()) * angle.sin()).normalize()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

struct Builder<'a> {
    params: &'a SynthParams,
    rng: ChaCha8Rng,
    segments: Vec<Segment>,
}

impl Builder<'_> {
    fn push(&mut self, parent: Option<u32>, start: Vec3, end: Vec3, radius: f64, kind: SegmentKind) -> u32 {
        let id = self.segments.len() as u32;
        self.segments.push(Segment {
            id,
            parent,
            start,
            end,
            radius,
            kind,
        });
        id
    }

    fn grow(&mut self, parent: u32, level: u32, length: f64) {
        let p = self.segments[parent as usize];
        let dir = p.direction();
        let [lo, hi] = self.params.branches_per_node;
        let n = self.rng.random_range(lo..=hi);
        let phi0: f64 = self.rng.random_range(0.0..std::f64::consts::TAU);
        let radius = p.radius * self.params.radius_decay;
        for k in 0..n {
            let [a, b] = self.params.branch_angle;
            let angle = self.rng.random_range(a..=b).to_radians();
            let jitter = self.rng.random_range(-0.3..0.3);
            let phi = phi0 + std::f64::consts::TAU * k as f64 / n as f64 + jitter;
            let child_dir = (tilt(dir, angle, phi) + Vec3::z() * self.params.tropism).normalize();
            let len = length * self.rng.random_range(0.85..1.15);
            let id = self.push(Some(parent), p.end, p.end + child_dir * len, radius, SegmentKind::Branch);
            if level < self.params.depth {
                self.grow(id, level + 1, length * self.params.length_decay);
            } else {
                self.leaves(id);
            }
        }
    }

    fn leaves(&mut self, branch: u32) {
        let b = self.segments[branch as usize];
        let expected = self.params.leaf_density * b.length();
        let n = (expected + self.rng.random_range(0.0..1.0)).floor() as usize;
        for _ in 0..n {
            let t: f64 = self.rng.random_range(0.2..1.0);
            let at = b.start + (b.end - b.start) * t;
            let dir = random_unit(&mut self.rng);
            let end = at + dir * (b.radius + self.params.petiole_length);
            let radius = b.radius.min(0.004);
            self.push(Some(branch), at, end, radius, SegmentKind::Leaf);
        }
    }
}

/// Builds a deterministic tree for `params.seed`: a vertical trunk from the
/// origin, `depth` levels of branching, and leaves on the terminal branches.
pub fn generate_tree(params: &SynthParams) -> Result<TreeMesh> {
    params.validate()?;
    let mut b = Builder {
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        segments: Vec::new(),
    };
    let trunk = b.push(
        None,
        Vec3::zeros(),
        Vec3::new(0.0, 0.0, params.trunk_height),
        params.trunk_radius,
        SegmentKind::Branch,
    );
    b.grow(trunk, 1, params.limb_length);
    Ok(TreeMesh {
        segments: b.segments,
        root: trunk,
        leaf_radius: params.leaf_radius,
    })
}

/// Up to `n` cut segments, each a whole limb whose subtree holds at most
/// `max_share` of the tree's surface area, largest first, with no chosen
/// limb inside another.
pub fn limb_candidates(mesh: &TreeMesh, n: usize, max_share: f64) -> Vec<u32> {
    let areas = mesh.subtree_areas();
    let total = mesh.total_area();
    let mut limbs: Vec<(u32, f64)> = mesh
        .segments
        .iter()
        .filter(|s| s.id != mesh.root && s.kind == SegmentKind::Branch)
        .map(|s| (s.id, areas[&s.id]))
        .filter(|&(_, a)| a <= max_share * total)
        .collect();
    limbs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut chosen: Vec<u32> = Vec::new();
    let mut blocked = std::collections::BTreeSet::new();
    for (id, _) in limbs {
        if chosen.len() == n {
            break;
        }
        if blocked.contains(&id) || chosen.iter().any(|&c| mesh.subtree(id).contains(&c)) {
            continue;
        }
        blocked.extend(mesh.subtree(id));
        chosen.push(id);
    }
    chosen
}
