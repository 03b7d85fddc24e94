//! Point-cloud file formats.
//!
//! CSV rows are `x,y,z[,label[,source_id]]`, optionally preceded by a header
//! row naming the columns. With a header, columns are matched by name and
//! unrecognised columns are ignored; `tree_id` is accepted as an alias for
//! `source_id`.
//!
//! The binary format has no header: each record is three little-endian
//! `f64` coordinates followed by one label byte (0 unknown, 1 trunk,
//! 2 foliage).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cloud::{Label, LabeledPoint, PointCloud};
use crate::error::{Error, Result};

pub const BINARY_RECORD_LEN: usize = 3 * 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    CsvAscii,
    BinaryXyz,
}

impl CloudFormat {
    /// Guesses the format from a file extension; anything that is not
    /// `.bin`/`.xyzb` is treated as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("xyzb") => CloudFormat::BinaryXyz,
            _ => CloudFormat::CsvAscii,
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let cloud = parse_cloud(&bytes, format)?;
    Ok(cloud.with_note(path.display().to_string()))
}

pub fn parse_cloud(bytes: &[u8], format: CloudFormat) -> Result<PointCloud> {
    match format {
        CloudFormat::CsvAscii => {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::ParseOffset {
                offset: e.valid_up_to(),
                message: "file is not valid UTF-8".into(),
            })?;
            parse_csv(text)
        }
        CloudFormat::BinaryXyz => parse_binary(bytes),
    }
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    x: usize,
    y: usize,
    z: usize,
    label: Option<usize>,
    source_id: Option<usize>,
}

const POSITIONAL: Columns = Columns {
    x: 0,
    y: 1,
    z: 2,
    label: Some(3),
    source_id: Some(4),
};

fn header_columns(fields: &[&str], line: usize) -> Result<Columns> {
    let find = |name: &str| fields.iter().position(|f| f.eq_ignore_ascii_case(name));
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::ParseLine {
            line,
            message: format!("header lacks column `{name}`"),
        })
    };
    Ok(Columns {
        x: required("x")?,
        y: required("y")?,
        z: required("z")?,
        label: find("label"),
        source_id: find("source_id").or_else(|| find("tree_id")),
    })
}

pub fn parse_csv(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut columns: Option<Columns> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();

        if columns.is_none() && points.is_empty() && fields[0].parse::<f64>().is_err() {
            columns = Some(header_columns(&fields, line)?);
            continue;
        }
        let cols = *columns.get_or_insert(POSITIONAL);

        let coord = |idx: usize, name: &str| -> Result<f64> {
            let field = fields.get(idx).ok_or_else(|| Error::ParseLine {
                line,
                message: format!("missing `{name}` column"),
            })?;
            let v: f64 = field.parse().map_err(|_| Error::ParseLine {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseLine {
                    line,
                    message: format!("non-finite `{name}` coordinate"),
                });
            }
            Ok(v)
        };

        let x = coord(cols.x, "x")?;
        let y = coord(cols.y, "y")?;
        let z = coord(cols.z, "z")?;
        let label = match cols.label.and_then(|c| fields.get(c)) {
            Some(f) => f.parse::<Label>().map_err(|message| Error::ParseLine { line, message })?,
            None => Label::Unknown,
        };
        let source_id = match cols.source_id.and_then(|c| fields.get(c)) {
            Some(f) if !f.is_empty() && *f != "-1" => Some(f.parse::<u32>().map_err(|_| Error::ParseLine {
                line,
                message: format!("`{f}` is not a valid source id"),
            })?),
            _ => None,
        };
        points.push(LabeledPoint {
            x,
            y,
            z,
            label,
            source_id,
        });
    }

    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

pub fn parse_binary(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if bytes.len() % BINARY_RECORD_LEN != 0 {
        let offset = bytes.len() - bytes.len() % BINARY_RECORD_LEN;
        return Err(Error::ParseOffset {
            offset,
            message: format!(
                "truncated record: {} trailing bytes",
                bytes.len() % BINARY_RECORD_LEN
            ),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / BINARY_RECORD_LEN);
    for (r, rec) in bytes.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let offset = r * BINARY_RECORD_LEN;
        let f = |k: usize| f64::from_le_bytes(rec[k * 8..k * 8 + 8].try_into().unwrap());
        let (x, y, z) = (f(0), f(1), f(2));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::ParseOffset {
                offset,
                message: "non-finite coordinate".into(),
            });
        }
        let label = Label::from_byte(rec[24]).ok_or_else(|| Error::ParseOffset {
            offset: offset + 24,
            message: format!("unknown label byte {}", rec[24]),
        })?;
        points.push(LabeledPoint::new(x, y, z, label));
    }
    Ok(PointCloud::new(points))
}

/// CSV text for a cloud. Coordinates use the shortest representation that
/// parses back to the identical `f64`.
pub fn to_csv(cloud: &PointCloud) -> String {
    let with_source = cloud.points.iter().any(|p| p.source_id.is_some());
    let mut out = String::with_capacity(cloud.len() * 32);
    out.push_str(if with_source { "x,y,z,label,source_id\n" } else { "x,y,z,label\n" });
    for p in &cloud.points {
        let _ = write!(out, "{},{},{},{}", p.x, p.y, p.z, p.label);
        if with_source {
            match p.source_id {
                Some(id) => {
                    let _ = write!(out, ",{id}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn to_binary(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * BINARY_RECORD_LEN);
    for p in &cloud.points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        out.push(p.label.to_byte());
    }
    out
}

pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat) -> Vec<u8> {
    match format {
        CloudFormat::CsvAscii => to_csv(cloud).into_bytes(),
        CloudFormat::BinaryXyz => to_binary(cloud),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    write_atomic(path, &encode_cloud(cloud, format))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
