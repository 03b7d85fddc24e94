//! Candidate cut generation, filtering and re-scoring.
//!
//! Voxels that sit above darker voxels get a shade score; graph nodes that
//! lie on many trunk paths of heavily shading voxels, weighted toward the
//! shading end of each path, get a high path-influence score `j`. The top
//! percentile of `j` is thinned by distance and the best `k` survivors are
//! simulated as cuts and re-scored.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, PointCloud, VoxelGrid};
use crate::pipeline::{analyze, analyze_grid, LightAnalysis, TreeStructure};
use crate::scoring::{percent_change, score_set, ScoreReport, TreeMeasurement};
use crate::treegraph::{CutSpec, PathMap, TreeGraph};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShadeField {
    pub score: BTreeMap<CellIndex, u32>,
}

/// For every cell, the number of occupied cells in the same column, lower
/// down, whose per-voxel score is strictly lower.
pub fn shade_scores(grid: &VoxelGrid, d_i: &BTreeMap<CellIndex, f64>) -> Result<ShadeField> {
    if let Some(missing) = grid.cells.keys().find(|k| !d_i.contains_key(k)) {
        return Err(Error::param("d_i", format!("no per-voxel score for cell {missing}")));
    }
    let mut columns: BTreeMap<(i64, i64), Vec<(i64, f64)>> = BTreeMap::new();
    for idx in grid.cells.keys() {
        columns.entry(idx.column()).or_default().push((idx.iz, d_i[idx]));
    }
    let mut score = BTreeMap::new();
    for ((ix, iy), cells) in columns {
        // Cells arrive in ascending iz from the ordered grid.
        for (k, &(iz, d)) in cells.iter().enumerate() {
            let count = cells[..k].iter().filter(|(_, below)| *below < d).count() as u32;
            score.insert(CellIndex::new(ix, iy, iz), count);
        }
    }
    Ok(ShadeField { score })
}

/// Linear-interpolation percentile (`q` in 0..=100) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    /// Path-influence score per graph node.
    pub j: Vec<f64>,
    /// High-shade endpoints that contributed.
    pub endpoints: Vec<usize>,
    pub warning: Option<String>,
}

/// Sums, over every high-shade endpoint `e`, the contribution
/// `1 / prop(i, e)` for each node `i` on the trunk path of `e`, where
/// `prop` is the inclusive node count from `i` to `e` over the inclusive
/// node count of the whole path. The trunk itself never scores.
pub fn path_influence(graph: &TreeGraph, paths: &PathMap, shade: &ShadeField, shade_percentile: f64) -> CandidateScore {
    let n = graph.len();
    let node_shade: Vec<u32> = graph
        .nodes
        .iter()
        .map(|node| shade.score.get(&node.cell).copied().unwrap_or(0))
        .collect();
    let nonzero: Vec<f64> = node_shade.iter().filter(|&&s| s > 0).map(|&s| s as f64).collect();
    let Some(threshold) = percentile(&nonzero, shade_percentile) else {
        return CandidateScore {
            j: vec![0.0; n],
            endpoints: Vec::new(),
            warning: Some("no voxel shades another; nothing to suggest".into()),
        };
    };

    let endpoints: Vec<usize> = (0..n)
        .filter(|&v| node_shade[v] > 0 && node_shade[v] as f64 >= threshold && paths.is_reachable(v))
        .collect();
    let mut j = vec![0.0; n];
    for &e in &endpoints {
        let path = paths.path(e).expect("endpoint is reachable");
        let total = path.len() as f64;
        for (k, &i) in path.iter().enumerate() {
            j[i] += total / (k + 1) as f64;
        }
    }
    j[graph.trunk] = 0.0;
    CandidateScore {
        j,
        endpoints,
        warning: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    pub location: Vec3,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Nodes in the top percentile of `j`, best first.
    pub candidates: Vec<Candidate>,
    /// Up to `k` candidates, pairwise at least `min_separation` apart.
    pub selected: Vec<Candidate>,
    pub warnings: Vec<String>,
}

/// Picks cut points from the top `percentile` of positive `j` scores.
///
/// Nodes within `trunk_exclusion` of the trunk are never candidates. The
/// pool is walked in descending `j` (ties by node id) and a node survives
/// only if it is at least `min_separation` from every earlier survivor.
pub fn select_candidates(
    scores: &CandidateScore,
    graph: &TreeGraph,
    percentile_q: f64,
    min_separation: f64,
    k: usize,
    trunk_exclusion: f64,
) -> Result<Selection> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if !(min_separation >= 0.0) {
        return Err(Error::param("min_separation", "must be non-negative"));
    }
    let trunk = graph.trunk_position();
    let eligible: Vec<usize> = (0..graph.len())
        .filter(|&v| v != graph.trunk && scores.j[v] > 0.0)
        .filter(|&v| (graph.nodes[v].centroid - trunk).norm() > trunk_exclusion)
        .collect();
    let mut warnings: Vec<String> = scores.warning.iter().cloned().collect();
    let values: Vec<f64> = eligible.iter().map(|&v| scores.j[v]).collect();
    let Some(threshold) = percentile(&values, percentile_q) else {
        warnings.push("no node has a positive path-influence score".into());
        return Ok(Selection {
            candidates: Vec::new(),
            selected: Vec::new(),
            warnings,
        });
    };

    let mut candidates: Vec<Candidate> = eligible
        .into_iter()
        .filter(|&v| scores.j[v] >= threshold)
        .map(|v| Candidate {
            node: v,
            location: graph.nodes[v].centroid,
            j: scores.j[v],
        })
        .collect();
    candidates.sort_by(|a, b| b.j.total_cmp(&a.j).then(a.node.cmp(&b.node)));

    let mut selected: Vec<Candidate> = Vec::new();
    for c in &candidates {
        if selected.len() == k {
            break;
        }
        if selected.iter().all(|s| (s.location - c.location).norm() >= min_separation) {
            selected.push(*c);
        }
    }
    if selected.len() < k {
        warnings.push(format!("only {} of {k} requested cut points survive separation filtering", selected.len()));
    }
    Ok(Selection {
        candidates,
        selected,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    /// `None` for the baseline, `A`, `B`, ... per cut, `All` for every cut.
    pub label: String,
    pub cuts: Vec<Vec3>,
    pub removed_points: usize,
    pub report: ScoreReport,
    pub d_change_pct: f64,
    pub s_change_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFailure {
    pub label: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub candidates: Vec<Candidate>,
    pub selected: Vec<Candidate>,
    pub baseline: VariantReport,
    /// One row per successful single-cut variant, then `All`.
    pub reports: Vec<VariantReport>,
    pub failures: Vec<VariantFailure>,
    pub warnings: Vec<String>,
}

impl SuggestionSet {
    /// Rows in the same layout as a cut comparison table, baseline first.
    pub fn rows(&self) -> impl Iterator<Item = &VariantReport> {
        std::iter::once(&self.baseline).chain(self.reports.iter())
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("cut,D,V_norm,L_norm,S,D_change_pct,S_change_pct\n");
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.3},{:.2},{:.2}",
                r.label, r.report.d, r.report.v_norm, r.report.l_norm, r.report.s, r.d_change_pct, r.s_change_pct
            );
        }
        out
    }

    /// Selected cut points as a cloud, for overlay rendering.
    pub fn overlay(&self) -> PointCloud {
        self.selected
            .iter()
            .map(|c| crate::geometry::LabeledPoint::from_vec(c.location, crate::geometry::Label::Unknown))
            .collect::<PointCloud>()
            .with_note("suggested cut points")
    }
}

/// Spreadsheet-style variant labels: A..Z, AA, AB, ...
pub fn variant_label(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

struct Variant {
    label: String,
    cuts: Vec<Vec3>,
}

/// Simulates each selected cut alone and all of them together, re-scores
/// every variant, and normalizes volume and light over the set formed by
/// the unpruned tree and the variants that succeeded.
pub fn evaluate_suggestions(
    cloud: &PointCloud,
    baseline: &LightAnalysis,
    structure: &TreeStructure,
    selected: &[Vec3],
    config: &PipelineConfig,
) -> Result<(VariantReport, Vec<VariantReport>, Vec<VariantFailure>)> {
    if selected.is_empty() {
        return Err(Error::param("selected", "no cut points to evaluate"));
    }
    let sky = config.sky()?;
    let mut variants: Vec<Variant> = selected
        .iter()
        .enumerate()
        .map(|(i, &p)| Variant {
            label: variant_label(i),
            cuts: vec![p],
        })
        .collect();
    variants.push(Variant {
        label: "All".into(),
        cuts: selected.to_vec(),
    });

    let outcomes: Vec<Result<(TreeMeasurement, usize)>> = variants
        .par_iter()
        .map(|v| {
            let cuts: Vec<CutSpec> = v.cuts.iter().map(|&p| CutSpec::new(p, config.cut_radius())).collect();
            let (result, kept, _) = structure.prune(cloud, &cuts)?;
            // Removal is per cell, so the kept cloud voxelizes to the original
            // grid minus the removed cells.
            let removed_cells = result.removed_nodes.iter().map(|&n| structure.graph.nodes[n].cell);
            let grid = structure.grid.without(removed_cells);
            debug_assert_eq!(grid.cells.values().map(|c| c.count()).sum::<usize>(), kept.len());
            let analysis = analyze_grid(grid, &sky, config)?;
            Ok((analysis.measurement, result.removed_point_indices.len()))
        })
        .collect();

    let mut set = vec![baseline.measurement];
    let mut ok_variants = Vec::new();
    let mut failures = Vec::new();
    for (v, outcome) in variants.into_iter().zip(outcomes) {
        match outcome {
            Ok((m, removed)) => {
                set.push(m);
                ok_variants.push((v, removed));
            }
            Err(e) => failures.push(VariantFailure {
                label: v.label,
                code: e.code().into(),
                message: e.to_string(),
            }),
        }
    }
    let reports = score_set(&set, config.coefficients)?;
    let base = reports[0];
    let row = |label: String, cuts: Vec<Vec3>, removed_points: usize, report: ScoreReport| VariantReport {
        label,
        cuts,
        removed_points,
        d_change_pct: percent_change(report.d, base.d),
        s_change_pct: percent_change(report.s, base.s),
        report,
    };
    let baseline_row = row("None".into(), Vec::new(), 0, base);
    let rows = ok_variants
        .into_iter()
        .zip(reports.into_iter().skip(1))
        .map(|((v, removed), report)| row(v.label, v.cuts, removed, report))
        .collect();
    Ok((baseline_row, rows, failures))
}

/// Full suggestion pipeline for one tree.
pub fn suggest(cloud: &PointCloud, config: &PipelineConfig) -> Result<SuggestionSet> {
    config.validate()?;
    let sky = config.sky()?;
    let baseline = analyze(cloud, &sky, config)?;
    let structure = TreeStructure::build(cloud, config)?;
    suggest_with(cloud, &baseline, &structure, config, config.k)
}

/// Suggestion pipeline over precomputed analysis and structure.
pub fn suggest_with(
    cloud: &PointCloud,
    baseline: &LightAnalysis,
    structure: &TreeStructure,
    config: &PipelineConfig,
    k: usize,
) -> Result<SuggestionSet> {
    let shade = shade_scores(&baseline.grid, &baseline.distribution.per_voxel)?;
    let scores = path_influence(&structure.graph, &structure.paths, &shade, config.shade_percentile);
    let selection = select_candidates(
        &scores,
        &structure.graph,
        config.candidate_percentile,
        config.min_separation,
        k,
        config.trunk_exclusion_radius(),
    )?;
    let mut warnings = selection.warnings.clone();
    for w in &warnings {
        log::warn!("{w}");
    }
    if selection.selected.is_empty() {
        let base = score_set(&[baseline.measurement], config.coefficients)?[0];
        return Ok(SuggestionSet {
            candidates: selection.candidates,
            selected: Vec::new(),
            baseline: VariantReport {
                label: "None".into(),
                cuts: Vec::new(),
                removed_points: 0,
                report: base,
                d_change_pct: 0.0,
                s_change_pct: 0.0,
            },
            reports: Vec::new(),
            failures: Vec::new(),
            warnings,
        });
    }
    let points: Vec<Vec3> = selection.selected.iter().map(|c| c.location).collect();
    let (baseline_row, reports, failures) = evaluate_suggestions(cloud, baseline, structure, &points, config)?;
    for f in &failures {
        warnings.push(format!("variant {} failed: {}", f.label, f.message));
    }
    Ok(SuggestionSet {
        candidates: selection.candidates,
        selected: selection.selected,
        baseline: baseline_row,
        reports,
        failures,
        warnings,
    })
}
