//! The batch commands. Each takes its inputs and a config and writes files;
//! none depends on wall-clock time or thread scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use canopy_core::geometry::io::{encode_cloud, load_cloud, write_atomic};
use canopy_core::geometry::CloudFormat;
use canopy_core::pipeline::{score_clouds, TreeStructure};
use canopy_core::suggest::{suggest, SuggestionSet};
use canopy_core::synth::{run_benchmark, BenchmarkReport};
use canopy_core::{CutSpec, PipelineConfig, PointCloud, PruneResult, ScoreReport, Vec3};
use serde::Serialize;

use crate::ErrorBody;

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load(path: &Path) -> Result<PointCloud> {
    load_cloud(path, CloudFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn extension(format: CloudFormat) -> &'static str {
    match format {
        CloudFormat::CsvAscii => "csv",
        CloudFormat::BinaryXyz => "bin",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ScoreFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeScore {
    pub tree: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ScoreReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreOutput {
    pub trees: Vec<TreeScore>,
}

impl ScoreOutput {
    pub fn failures(&self) -> usize {
        self.trees.iter().filter(|t| t.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tree,D,V_norm,L_norm,S\n");
        for t in &self.trees {
            if let Some(r) = &t.report {
                let _ = writeln!(out, "{},{:.3},{:.3},{:.3},{:.3}", t.tree, r.d, r.v_norm, r.l_norm, r.s);
            }
        }
        out
    }

    pub fn render(&self, format: ScoreFormat) -> Result<String> {
        Ok(match format {
            ScoreFormat::Csv => self.to_csv(),
            ScoreFormat::Json => serde_json::to_string_pretty(self)? + "\n",
        })
    }
}

/// Scores every cloud as one comparison set. A file that fails to load or
/// measure gets an error entry and is left out of normalization.
pub fn score(paths: &[PathBuf], config: &PipelineConfig) -> Result<ScoreOutput> {
    if paths.is_empty() {
        bail!("no input clouds");
    }
    let loaded: Vec<Result<PointCloud>> = paths.iter().map(|p| load(p)).collect();
    let clouds: Vec<PointCloud> = loaded.iter().filter_map(|c| c.as_ref().ok().cloned()).collect();
    let mut reports = score_clouds(&clouds, config)?.into_iter();
    let trees = paths
        .iter()
        .zip(loaded)
        .map(|(path, cloud)| {
            let tree = path.display().to_string();
            let result = cloud.and_then(|_| {
                reports
                    .next()
                    .expect("one report per loaded cloud")
                    .with_context(|| format!("scoring {tree}"))
            });
            match result {
                Ok(r) => TreeScore {
                    tree,
                    report: Some(r),
                    error: None,
                },
                Err(e) => TreeScore {
                    tree,
                    report: None,
                    error: Some(ErrorBody::from_error(&e)),
                },
            }
        })
        .collect();
    Ok(ScoreOutput { trees })
}

/// Cut locations, one per row of a point file. Labels are ignored.
pub fn read_cuts(path: &Path, cut_radius: f64) -> Result<Vec<CutSpec>> {
    let points = load_cloud(path, CloudFormat::from_path(path))
        .with_context(|| format!("reading cuts from {}", path.display()))?;
    Ok(points.positions().map(|p| CutSpec::new(p, cut_radius)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneOutput {
    pub trunk: Vec3,
    pub cuts: Vec<CutSpec>,
    pub input_points: usize,
    pub kept_points: usize,
    pub removed_points: usize,
    pub result: PruneResult,
}

/// Prunes `cloud` at `cuts` and writes `kept`, `removed` and `prune.json`
/// into `out_dir`.
pub fn prune(cloud_path: &Path, cuts: &[CutSpec], out_dir: &Path, config: &PipelineConfig) -> Result<PruneOutput> {
    if cuts.is_empty() {
        bail!("no cut points given");
    }
    let format = CloudFormat::from_path(cloud_path);
    let cloud = load(cloud_path)?;
    let structure = TreeStructure::build(&cloud, config)?;
    let (result, kept, removed) = structure.prune(&cloud, cuts)?;
    prepare_dir(out_dir)?;
    let ext = extension(format);
    write_file(&out_dir.join(format!("kept.{ext}")), &encode_cloud(&kept, format))?;
    write_file(&out_dir.join(format!("removed.{ext}")), &encode_cloud(&removed, format))?;
    let output = PruneOutput {
        trunk: structure.trunk_position(),
        cuts: cuts.to_vec(),
        input_points: cloud.len(),
        kept_points: kept.len(),
        removed_points: removed.len(),
        result,
    };
    write_json(&out_dir.join("prune.json"), &output)?;
    Ok(output)
}

/// Writes `suggestions.json`, `suggestions.csv` and `overlay.csv`.
pub fn suggest_cuts(cloud_path: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<SuggestionSet> {
    let cloud = load(cloud_path)?;
    let set = suggest(&cloud, config)?;
    prepare_dir(out_dir)?;
    write_json(&out_dir.join("suggestions.json"), &set)?;
    write_file(&out_dir.join("suggestions.csv"), set.to_csv().as_bytes())?;
    write_file(
        &out_dir.join("overlay.csv"),
        &encode_cloud(&set.overlay(), CloudFormat::CsvAscii),
    )?;
    Ok(set)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub trees: usize,
    pub failures: usize,
    pub mean_f1: f64,
    pub mean_f1_by_spacing: Vec<(f64, f64)>,
}

/// Runs the synthetic benchmark and writes `spacing.csv`, `spacing_cuts.csv`,
/// `trees.csv` and `summary.json`.
pub fn benchmark(out_dir: &Path, config: &PipelineConfig) -> Result<(BenchmarkReport, BenchmarkSummary)> {
    let report = run_benchmark(config)?;
    if report.trees.is_empty() {
        return Err(anyhow!("every benchmark tree failed ({} failures)", report.failures.len()));
    }
    prepare_dir(out_dir)?;
    write_file(&out_dir.join("spacing.csv"), report.spacing_csv().as_bytes())?;
    write_file(&out_dir.join("spacing_cuts.csv"), report.spacing_cuts_csv().as_bytes())?;
    write_file(&out_dir.join("trees.csv"), report.trees_csv().as_bytes())?;
    let summary = BenchmarkSummary {
        trees: report.trees.len(),
        failures: report.failures.len(),
        mean_f1: report.mean_f1(),
        mean_f1_by_spacing: report.mean_f1_by_spacing(),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok((report, summary))
}
