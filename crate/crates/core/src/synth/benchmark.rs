use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::f1::{f1_from_masks, should_be_removed, F1Score};
use super::generate::{generate_tree, limb_candidates, SynthParams};
use super::mesh::{mesh_prune, TreeMesh};
use super::scan::{virtual_scan, ScanConfig, Scene};
use super::stand::{build_stand_ordered, nearest_tree, row_sensors, stand_order};
use super::{mix_seed, GroundTruthPair};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::pipeline::TreeStructure;
use crate::treegraph::{simulate_prune, CutSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Distance between neighbouring tree origins, meters.
    pub spacings: Vec<f64>,
    pub replicates: usize,
    /// Inclusive range of cuts made on each tree.
    pub cuts: [usize; 2],
    /// Number of distinct tree models, which is also the stand size.
    pub models: usize,
    pub tree: SynthParams,
    /// Largest share of a tree's surface area one cut may take.
    pub max_limb_share: f64,
    pub sensor_distance: f64,
    pub sensor_height: f64,
    pub angular_resolution: f64,
    pub noise_sigma: f64,
    pub max_range: f64,
    pub elevation_range: [f64; 2],
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            spacings: vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            replicates: 8,
            cuts: [1, 4],
            models: 3,
            tree: SynthParams::default(),
            max_limb_share: 0.3,
            sensor_distance: 5.0,
            sensor_height: 1.6,
            angular_resolution: 0.3,
            noise_sigma: 0.01,
            max_range: 30.0,
            elevation_range: [-30.0, 80.0],
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spacings.is_empty() || self.spacings.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::param("benchmark.spacings", "need at least one positive spacing"));
        }
        if self.replicates == 0 {
            return Err(Error::param("benchmark.replicates", "must be at least 1"));
        }
        let [lo, hi] = self.cuts;
        if lo == 0 || lo > hi {
            return Err(Error::param("benchmark.cuts", format!("invalid range [{lo}, {hi}]")));
        }
        if self.models == 0 {
            return Err(Error::param("benchmark.models", "must be at least 1"));
        }
        if !(self.max_limb_share > 0.0 && self.max_limb_share <= 1.0) {
            return Err(Error::param("benchmark.max_limb_share", "must be in (0, 1]"));
        }
        if !(self.sensor_distance > 0.0) {
            return Err(Error::param("benchmark.sensor_distance", "must be positive"));
        }
        self.tree.validate()?;
        self.scan_config(Vec::new(), 0).validate()
    }

    pub fn scan_config(&self, sensor_positions: Vec<crate::Vec3>, seed: u64) -> ScanConfig {
        ScanConfig {
            sensor_positions,
            angular_resolution: self.angular_resolution,
            noise_sigma: self.noise_sigma,
            max_range: self.max_range,
            elevation_range: self.elevation_range,
            seed,
        }
    }

    pub fn stand_count(&self) -> usize {
        self.spacings.len() * self.replicates
    }
}

/// The benchmark's tree models and the limbs each may lose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub meshes: Vec<TreeMesh>,
    pub limbs: Vec<Vec<u32>>,
}

pub fn build_models(config: &BenchmarkConfig, seed: u64) -> Result<ModelSet> {
    let mut meshes = Vec::with_capacity(config.models);
    let mut limbs = Vec::with_capacity(config.models);
    for m in 0..config.models {
        let params = SynthParams {
            seed: mix_seed(seed, m as u64),
            ..config.tree.clone()
        };
        let mesh = generate_tree(&params)?;
        let candidates = limb_candidates(&mesh, config.cuts[1], config.max_limb_share);
        if candidates.is_empty() {
            return Err(Error::param("benchmark.max_limb_share", format!("model {m} has no limb small enough to cut")));
        }
        limbs.push(candidates);
        meshes.push(mesh);
    }
    Ok(ModelSet { meshes, limbs })
}

/// One stand: placement, the cuts made on each tree and both scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandCase {
    pub spacing: f64,
    pub replicate: usize,
    pub reference_scene: Scene,
    pub pruned_scene: Scene,
    /// Per slot, in world coordinates.
    pub pairs: Vec<GroundTruthPair>,
}

/// Builds reference and pruned versions of one stand and scans both with
/// identical sensors and noise.
pub fn build_case(models: &ModelSet, config: &BenchmarkConfig, spacing: f64, replicate: usize, seed: u64) -> Result<StandCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = stand_order(models.meshes.len(), rng.random());
    let reference_scene = build_stand_ordered(&models.meshes, spacing, &order)?;

    let mut pruned_scene = reference_scene.clone();
    let mut cuts = Vec::with_capacity(order.len());
    for (slot, &model) in order.iter().enumerate() {
        let limbs = &models.limbs[model];
        let hi = config.cuts[1].min(limbs.len());
        let lo = config.cuts[0].min(hi);
        let n = rng.random_range(lo..=hi);
        let mut chosen = limbs.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(n);
        let pruned = mesh_prune(&reference_scene.trees[slot].mesh, &chosen)?;
        pruned_scene.trees[slot].mesh = pruned.mesh.clone();
        cuts.push(pruned);
    }

    let sensors = row_sensors(&reference_scene, config.sensor_distance, config.sensor_height);
    let scan = config.scan_config(sensors, rng.random());
    let reference_scan = virtual_scan(&reference_scene, &scan)?;
    let pruned_scan = virtual_scan(&pruned_scene, &scan)?;
    let pairs = cuts
        .into_iter()
        .map(|c| GroundTruthPair {
            reference_scan: reference_scan.clone(),
            pruned_scan: pruned_scan.clone(),
            removed_segment_ids: c.removed_ids,
            cut_points: c.cut_points,
        })
        .collect();
    Ok(StandCase {
        spacing,
        replicate,
        reference_scene,
        pruned_scene,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOutcome {
    pub spacing: f64,
    pub replicate: usize,
    pub slot: usize,
    pub model: usize,
    pub n_cuts: usize,
    pub points: usize,
    pub truth_removed: usize,
    pub predicted_removed: usize,
    pub score: F1Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFailure {
    pub spacing: f64,
    pub replicate: usize,
    pub slot: usize,
    pub code: String,
    pub message: String,
}

/// Points of the reference scan assigned to `slot` by nearest tree origin,
/// with ground points dropped.
pub fn segment_tree(scene: &Scene, scan: &PointCloud, slot: usize) -> PointCloud {
    let idx: Vec<usize> = scan
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.source_id.is_some() && nearest_tree(scene, p.x) == Some(slot))
        .map(|(i, _)| i)
        .collect();
    scan.subset(&idx)
}

/// Runs the prune simulator on every tree of a stand and scores the
/// predicted removal against the pruned scan.
pub fn evaluate_case(case: &StandCase, config: &PipelineConfig) -> Vec<std::result::Result<TreeOutcome, TreeFailure>> {
    let Some(first) = case.pairs.first() else {
        return Vec::new();
    };
    let ground_truth: PointCloud = first
        .pruned_scan
        .cloud
        .points
        .iter()
        .filter(|p| p.source_id.is_some())
        .copied()
        .collect();
    let tolerance = config.match_tolerance();
    case.pairs
        .iter()
        .enumerate()
        .map(|(slot, pair)| {
            let fail = |e: Error| TreeFailure {
                spacing: case.spacing,
                replicate: case.replicate,
                slot,
                code: e.code().into(),
                message: e.to_string(),
            };
            let cloud = segment_tree(&case.reference_scene, &pair.reference_scan.cloud, slot);
            let structure = TreeStructure::build(&cloud, config).map_err(fail)?;
            let cuts: Vec<CutSpec> = pair.cut_points.iter().map(|&p| CutSpec::new(p, config.cut_radius())).collect();
            let result = simulate_prune(&structure.graph, &structure.paths, &cuts).map_err(fail)?;
            let mut predicted = vec![false; cloud.len()];
            for &i in &result.removed_point_indices {
                predicted[i] = true;
            }
            let truth = should_be_removed(&cloud, &ground_truth, tolerance).map_err(fail)?;
            let score = f1_from_masks(&predicted, &truth).map_err(fail)?;
            Ok(TreeOutcome {
                spacing: case.spacing,
                replicate: case.replicate,
                slot,
                model: case.reference_scene.trees[slot].model,
                n_cuts: pair.cut_points.len(),
                points: cloud.len(),
                truth_removed: truth.iter().filter(|&&t| t).count(),
                predicted_removed: result.removed_point_indices.len(),
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub trees: Vec<TreeOutcome>,
    pub failures: Vec<TreeFailure>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl BenchmarkReport {
    pub fn mean_f1(&self) -> f64 {
        mean(self.trees.iter().map(|t| t.score.f1))
    }

    /// Mean F1 per spacing, ascending.
    pub fn mean_f1_by_spacing(&self) -> Vec<(f64, f64)> {
        let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for t in &self.trees {
            groups.entry(t.spacing.to_bits()).or_default().push(t.score.f1);
        }
        let mut out: Vec<(f64, f64)> = groups
            .into_iter()
            .map(|(k, v)| (f64::from_bits(k), mean(v.into_iter())))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    pub fn spacing_csv(&self) -> String {
        let mut out = String::from("spacing,trees,mean_precision,mean_recall,mean_f1\n");
        for (spacing, _) in self.mean_f1_by_spacing() {
            let group: Vec<&TreeOutcome> = self.trees.iter().filter(|t| t.spacing == spacing).collect();
            let _ = writeln!(
                out,
                "{spacing},{},{:.4},{:.4},{:.4}",
                group.len(),
                mean(group.iter().map(|t| t.score.precision)),
                mean(group.iter().map(|t| t.score.recall)),
                mean(group.iter().map(|t| t.score.f1)),
            );
        }
        out
    }

    /// Mean F1 for every (spacing, cut count) pair that occurred.
    pub fn spacing_cuts_csv(&self) -> String {
        let mut groups: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
        for t in &self.trees {
            groups.entry((t.spacing.to_bits(), t.n_cuts)).or_default().push(t.score.f1);
        }
        let mut rows: Vec<(f64, usize, usize, f64)> = groups
            .into_iter()
            .map(|((s, n), v)| (f64::from_bits(s), n, v.len(), mean(v.into_iter())))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = String::from("spacing,n_cuts,trees,mean_f1\n");
        for (s, n, count, f1) in rows {
            let _ = writeln!(out, "{s},{n},{count},{f1:.4}");
        }
        out
    }

    pub fn trees_csv(&self) -> String {
        let mut out = String::from(
            "spacing,replicate,slot,model,n_cuts,points,truth_removed,predicted_removed,precision,recall,f1\n",
        );
        for t in &self.trees {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                t.spacing,
                t.replicate,
                t.slot,
                t.model,
                t.n_cuts,
                t.points,
                t.truth_removed,
                t.predicted_removed,
                t.score.precision,
                t.score.recall,
                t.score.f1
            );
        }
        out
    }
}

/// Runs every stand of the benchmark. Stands are independent and seeded
/// from `config.seed`, so the report does not depend on scheduling.
pub fn run_benchmark(config: &PipelineConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let bench = &config.benchmark;
    let models = build_models(bench, config.seed)?;
    let jobs: Vec<(f64, usize, u64)> = bench
        .spacings
        .iter()
        .enumerate()
        .flat_map(|(si, &s)| {
            (0..bench.replicates).map(move |r| (s, r, mix_seed(config.seed, 1_000_003 * (si as u64 + 1) + r as u64)))
        })
        .collect();
    let results: Vec<Result<Vec<std::result::Result<TreeOutcome, TreeFailure>>>> = jobs
        .par_iter()
        .map(|&(spacing, replicate, seed)| {
            let case = build_case(&models, bench, spacing, replicate, seed)?;
            Ok(evaluate_case(&case, config))
        })
        .collect();
    let mut report = BenchmarkReport::default();
    for r in results {
        for outcome in r? {
            match outcome {
                Ok(t) => report.trees.push(t),
                Err(f) => {
                    log::warn!("stand {} / {} slot {}: {}", f.spacing, f.replicate, f.slot, f.message);
                    report.failures.push(f)
                }
            }
        }
    }
    Ok(report)
}
