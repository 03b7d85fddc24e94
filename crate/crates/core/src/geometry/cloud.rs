use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Trunk,
    Foliage,
    #[default]
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Trunk => "trunk",
            Label::Foliage => "foliage",
            Label::Unknown => "unknown",
        }
    }

    /// Byte tag used by the binary format.
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Unknown => 0,
            Label::Trunk => 1,
            Label::Foliage => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Label::Unknown),
            1 => Some(Label::Trunk),
            2 => Some(Label::Foliage),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "trunk" => Ok(Label::Trunk),
            "foliage" => Ok(Label::Foliage),
            "unknown" | "" => Ok(Label::Unknown),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<u32>,
}

impl LabeledPoint {
    pub fn new(x: f64, y: f64, z: f64, label: Label) -> Self {
        Self {
            x,
            y,
            z,
            label,
            source_id: None,
        }
    }

    pub fn from_vec(p: Vec3, label: Label) -> Self {
        Self::new(p.x, p.y, p.z, label)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<LabeledPoint>,
    #[serde(default)]
    pub crs_note: String,
}

impl PointCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        Self {
            points,
            crs_note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.crs_note = note.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(LabeledPoint::position)
    }

    /// Axis-aligned bounds as `(min, max)`, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.positions();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p))))
    }

    /// Builds a cloud from the points at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            crs_note: self.crs_note.clone(),
        }
    }

    pub fn translated(&self, offset: Vec3) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| LabeledPoint {
                    x: p.x + offset.x,
                    y: p.y + offset.y,
                    z: p.z + offset.z,
                    ..*p
                })
                .collect(),
            crs_note: self.crs_note.clone(),
        }
    }
}

impl FromIterator<LabeledPoint> for PointCloud {
    fn from_iter<T: IntoIterator<Item = LabeledPoint>>(iter: T) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}
