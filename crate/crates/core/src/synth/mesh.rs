use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Slack allowed when checking that a child starts on its parent.
pub const ATTACH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Branch,
    Leaf,
}

/// A cylinder from `start` to `end`. Leaf segments are petioles; the leaf
/// blade is a disc of the mesh's `leaf_radius` centred on `end`, facing
/// along the petiole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u32,
    pub parent: Option<u32>,
    pub start: Vec3,
    pub end: Vec3,
    pub radius: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn midpoint(&self) -> Vec3 {
        (self.start + self.end) / 2.0
    }

    pub fn direction(&self) -> Vec3 {
        (self.end - self.start).normalize()
    }

    /// Distance from `p` to the segment's axis.
    pub fn axis_distance(&self, p: Vec3) -> f64 {
        let d = self.end - self.start;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - self.start).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (p - (self.start + d * t)).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMesh {
    /// Sorted by id; parents precede children.
    pub segments: Vec<Segment>,
    pub root: u32,
    pub leaf_radius: f64,
}

impl TreeMesh {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Segment> {
        self.segments.binary_search_by_key(&id, |s| s.id).ok().map(|i| &self.segments[i])
    }

    pub fn children(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for s in &self.segments {
            if let Some(p) = s.parent {
                out.entry(p).or_default().push(s.id);
            }
        }
        out
    }

    /// `id` and everything distal to it.
    pub fn subtree(&self, id: u32) -> BTreeSet<u32> {
        let children = self.children();
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                if let Some(c) = children.get(&v) {
                    stack.extend(c.iter().copied());
                }
            }
        }
        out
    }

    /// Visible surface area of one segment: bark for branches, blade for leaves.
    pub fn surface_area(&self, s: &Segment) -> f64 {
        match s.kind {
            SegmentKind::Branch => 2.0 * std::f64::consts::PI * s.radius * s.length(),
            SegmentKind::Leaf => std::f64::consts::PI * self.leaf_radius * self.leaf_radius,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.segments.iter().map(|s| self.surface_area(s)).sum()
    }

    /// Surface area of each segment's whole subtree, keyed by id.
    pub fn subtree_areas(&self) -> BTreeMap<u32, f64> {
        let mut area: BTreeMap<u32, f64> = self.segments.iter().map(|s| (s.id, self.surface_area(s))).collect();
        // Parents precede children, so a reverse sweep accumulates bottom-up.
        for s in self.segments.iter().rev() {
            if let Some(p) = s.parent {
                let a = area[&s.id];
                if let Some(pa) = area.get_mut(&p) {
                    *pa += a;
                }
            }
        }
        area
    }

    pub fn translated(&self, by: Vec3) -> TreeMesh {
        let mut out = self.clone();
        for s in &mut out.segments {
            s.start += by;
            s.end += by;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Consistency(m));
        if self.get(self.root).map(|r| r.parent.is_some()).unwrap_or(true) {
            return bad(format!("root segment {} missing or has a parent", self.root));
        }
        for w in self.segments.windows(2) {
            if w[0].id >= w[1].id {
                return bad("segment ids are not strictly increasing".into());
            }
        }
        for s in &self.segments {
            let Some(pid) = s.parent else {
                if s.id != self.root {
                    return bad(format!("segment {} has no parent but is not the root", s.id));
                }
                continue;
            };
            let Some(p) = self.get(pid) else {
                return bad(format!("segment {} has unknown parent {pid}", s.id));
            };
            if pid >= s.id {
                return bad(format!("segment {} precedes its parent {pid}", s.id));
            }
            if p.axis_distance(s.start) > p.radius + ATTACH_TOLERANCE {
                return bad(format!("segment {} does not start on its parent {pid}", s.id));
            }
            if s.radius > p.radius {
                return bad(format!("segment {} is thicker than its parent {pid}", s.id));
            }
            if p.kind == SegmentKind::Leaf {
                return bad(format!("segment {} grows from leaf {pid}", s.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedMesh {
    pub mesh: TreeMesh,
    pub removed_ids: BTreeSet<u32>,
    /// Midpoint of each cut segment, in cut order.
    pub cut_points: Vec<Vec3>,
}

/// Removes each cut segment and everything distal to it.
pub fn mesh_prune(mesh: &TreeMesh, cut_ids: &[u32]) -> Result<PrunedMesh> {
    let mut removed = BTreeSet::new();
    let mut cut_points = Vec::with_capacity(cut_ids.len());
    for &id in cut_ids {
        let Some(seg) = mesh.get(id) else {
            return Err(Error::InvalidCut(format!("segment {id} does not exist")));
        };
        if id == mesh.root {
            return Err(Error::InvalidCut(format!("segment {id} is the root")));
        }
        cut_points.push(seg.midpoint());
        removed.extend(mesh.subtree(id));
    }
    let mut pruned = mesh.clone();
    pruned.segments.retain(|s| !removed.contains(&s.id));
    Ok(PrunedMesh {
        mesh: pruned,
        removed_ids: removed,
        cut_points,
    })
}
