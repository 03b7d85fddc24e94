//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`;
//! exits nonzero if any criterion fails.

#[path = "../../core/tests/common/prune_oracle.rs"]
mod prune_oracle;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use canopy_cli::app::run_cli;
use canopy_core::geometry::io::save_cloud;
use canopy_core::geometry::{voxelize, CloudFormat, Label, LabeledPoint};
use canopy_core::light::{raytrace, response, LogBase, SkyModel};
use canopy_core::scoring::combined_score;
use canopy_core::suggest::suggest;
use canopy_core::synth::{generate_tree, run_benchmark, scan_single_tree, ScanConfig, SynthParams};
use canopy_core::{CellIndex, Coefficients, PipelineConfig, PointCloud, Vec3, VoxelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// (table, cut, D, V, L, S) as printed.
const ROWS: &[(u8, &str, f64, f64, f64, f64)] = &[
    (2, "None", 0.269, 1.000, 1.000, 1.530),
    (2, "A", 0.277, 0.978, 0.969, 1.516),
    (2, "B", 0.282, 0.958, 0.947, 1.502),
    (2, "C", 0.297, 0.568, 0.595, 1.108),
    (2, "D", 0.301, 0.510, 0.537, 1.052),
    (2, "E", 0.282, 0.853, 0.931, 1.414),
    (2, "F", 0.280, 0.929, 0.905, 1.462),
    (2, "G", 0.277, 0.963, 0.940, 1.495),
    (2, "H", 0.278, 0.955, 0.942, 1.492),
    (2, "I", 0.279, 0.913, 0.904, 1.447),
    (2, "All", 0.315, 0.418, 0.420, 0.963),
    (3, "None", 0.182, 1.000, 1.000, 1.391),
    (3, "A", 0.193, 0.955, 0.967, 1.362),
    (3, "B", 0.198, 0.916, 0.898, 1.318),
    (3, "C", 0.195, 0.948, 0.975, 1.363),
    (3, "D", 0.204, 0.889, 0.896, 1.307),
    (3, "E", 0.185, 0.987, 0.963, 1.374),
    (3, "F", 0.188, 0.956, 0.931, 1.345),
    (3, "G", 0.189, 0.949, 0.996, 1.360),
    (3, "H", 0.185, 0.978, 0.982, 1.372),
    (3, "I", 0.200, 0.880, 0.895, 1.293),
    (3, "All", 0.227, 0.761, 0.736, 1.194),
    (3, "Manual", 0.197, 0.808, 0.989, 1.259),
];

fn score_identity() -> Outcome {
    let c = Coefficients { alpha: 1.6, beta: 0.8, gamma: 0.3 };
    let misses: Vec<String> = ROWS
        .iter()
        .filter_map(|&(t, cut, d, v, l, s)| {
            let ours = combined_score(d, v, l, &c);
            ((ours - s).abs() > 1e-3).then(|| format!("T{t} {cut} {ours:.4} vs {s}"))
        })
        .collect();
    outcome(
        misses.is_empty(),
        format!("{}/{} rows within ±0.001; misses: [{}]", ROWS.len() - misses.len(), ROWS.len(), misses.join(", ")),
    )
}

/// Same rows, allowing for the 3-decimal rounding of the printed inputs and output.
fn score_identity_rounding() -> Outcome {
    let c = Coefficients { alpha: 1.6, beta: 0.8, gamma: 0.3 };
    let bound = 0.0005 * (c.alpha + c.beta + c.gamma) + 0.0005;
    let worst = ROWS
        .iter()
        .map(|&(_, _, d, v, l, s)| (combined_score(d, v, l, &c) - s).abs())
        .fold(0.0, f64::max);
    outcome(worst <= bound, format!("worst |ΔS| = {worst:.5}, rounding bound {bound:.5}"))
}

fn d_response() -> Outcome {
    let r = |p| response(p, LogBase::Natural);
    let exact = r(0.0) == -0.25 && r(0.25) == -0.0625 && r(1.0) == std::f64::consts::LN_2;
    let above = r(0.25 + 1e-12);
    let jump = (above - 1.25f64.ln()).abs() < 1e-9 && above - r(0.25) > 0.28;
    let sweep: Vec<f64> = (1..=750).map(|i| r(0.25 + i as f64 / 1000.0)).collect();
    let monotone = sweep.windows(2).all(|w| w[1] > w[0]);
    outcome(
        exact && jump && monotone,
        format!(
            "D(0)={}, D(0.25)={}, D(1)={:.6}, D(0.25+)={above:.6}, monotone on (0.25,1]: {monotone}",
            r(0.0),
            r(0.25),
            r(1.0)
        ),
    )
}

fn prune_oracle() -> Outcome {
    let mut counts = Vec::new();
    let mut exhaustive = prune_oracle::Tally::default();
    for n in 1..=5 {
        let mut t = prune_oracle::Tally::default();
        prune_oracle::for_each_weighted_graph(n, &[1.0, 2.0], |edges| t.add(prune_oracle::check_graph(n, edges, n)));
        counts.push(t.graphs);
        exhaustive.add(t);
    }
    let mut sampled = prune_oracle::Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c1e);
    for n in 6..=8 {
        for _ in 0..150 {
            let extra = rng.random_range(0.05..0.6);
            let edges = prune_oracle::random_graph(n, &[1.0, 2.0], extra, &mut rng);
            sampled.add(prune_oracle::check_graph(n, &edges, n));
        }
    }
    let counts_ok = counts == [1, 2, 20, 624, 55_248];
    let clean = exhaustive.mismatches == 0 && sampled.mismatches == 0;
    // Connected labeled graphs with {1,2} weights for n = 6, 7, 8.
    let missing = "n=6 (13982208 graphs), n=7 (~1.0e10), n=8 (~2.3e13) not enumerated";
    outcome(
        false,
        format!(
            "exhaustive n<=5: {:?} graphs, {} cases, {} mismatches (counts ok: {counts_ok}); sampled n=6..8: {} graphs, {} cases, {} mismatches; {missing}; clean so far: {clean}",
            counts, exhaustive.cases, exhaustive.mismatches, sampled.graphs, sampled.cases, sampled.mismatches
        ),
    )
}

fn grid_of(cells: &[(i64, i64, i64)], s: f64) -> VoxelGrid {
    let cloud: PointCloud = cells
        .iter()
        .map(|&(x, y, z)| LabeledPoint::new((x as f64 + 0.5) * s, (y as f64 + 0.5) * s, (z as f64 + 0.5) * s, Label::Unknown))
        .collect();
    voxelize(&cloud, s).unwrap()
}

fn light_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut worst_balance: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..80);
        let cells: Vec<(i64, i64, i64)> = (0..n)
            .map(|_| (rng.random_range(-5..5), rng.random_range(-5..5), rng.random_range(0..8)))
            .collect();
        let grid = grid_of(&cells, 0.25);
        let samples = rng.random_range(1..4);
        let mut sky: Option<SkyModel> = None;
        for _ in 0..samples {
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            let el: f64 = rng.random_range(0.05..std::f64::consts::FRAC_PI_2);
            let one = SkyModel::single(-Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()), el.sin());
            match sky.as_mut() {
                Some(s) => s.samples.extend(one.samples),
                None => sky = Some(one),
            }
        }
        let sky = sky.unwrap();
        let kappa = rng.random_range(0.01..=1.0);
        let field = raytrace(&grid, &sky, kappa, 0.1).unwrap();
        let absorbed = field.total_absorbed();
        if absorbed > field.total_emitted {
            violations += 1;
        }
        worst_balance = worst_balance.max((absorbed + field.escaped - field.total_emitted).abs() / field.total_emitted);
    }

    let down = SkyModel::single(Vec3::new(0.0, 0.0, -1.0), 1.0);
    let mut column_ok = true;
    for gaps in [vec![0, 1, 2], vec![0, 3], vec![1, 2, 6, 7], vec![4]] {
        let cells: Vec<_> = gaps.iter().map(|&z| (0, 0, z)).collect();
        let top = *gaps.iter().max().unwrap();
        let field = raytrace(&grid_of(&cells, 0.25), &down, 1.0, 0.125).unwrap();
        column_ok &= field.absorbed.iter().all(|(k, &v)| (k.iz == top) == (v > 0.0));
    }

    let field = raytrace(&grid_of(&[(0, 0, 0), (0, 0, 1), (0, 0, 2)], 0.25), &down, 0.5, 0.125).unwrap();
    let incident = field.total_emitted;
    let got: Vec<f64> = (0..3).rev().map(|z| field.absorbed[&CellIndex::new(0, 0, z)] / incident).collect();
    let series_ok = got == [0.5, 0.25, 0.125] && field.escaped / incident == 0.125;

    outcome(
        violations == 0 && worst_balance < 1e-9 && column_ok && series_ok,
        format!(
            "1000 grids: {violations} violations, worst |absorbed+escaped-emitted|/emitted = {worst_balance:.1e}; kappa=1 columns ok: {column_ok}; kappa=0.5 fractions {got:?}"
        ),
    )
}

fn f1_benchmark() -> Outcome {
    let report = run_benchmark(&PipelineConfig::default()).unwrap();
    let mean = report.mean_f1();
    let by = report.mean_f1_by_spacing();
    let at = |s: f64| by.iter().find(|(x, _)| *x == s).map(|p| p.1).unwrap_or(f64::NAN);
    let per: Vec<String> = by.iter().map(|(s, f)| format!("{s}m {f:.3}")).collect();
    outcome(
        (0.68..=0.90).contains(&mean) && at(8.0) >= at(3.0),
        format!(
            "{} trees ({} failed), mean F1 {mean:.3} (band [0.68, 0.90]); {}",
            report.trees.len(),
            report.failures.len(),
            per.join(", ")
        ),
    )
}

fn suggestion() -> Outcome {
    let config = PipelineConfig::default();
    let mut gains = Vec::new();
    let mut problems = Vec::new();
    for seed in 0..6u64 {
        let mesh = generate_tree(&SynthParams { seed, ..Default::default() }).unwrap();
        let scan = ScanConfig {
            angular_resolution: 0.3,
            seed,
            ..Default::default()
        };
        let cloud = scan_single_tree(&mesh, &scan, 6.0, 1.6).unwrap();
        let set = match suggest(&cloud, &config) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("tree {seed}: {e}"));
                continue;
            }
        };
        let Some(all) = set.reports.iter().find(|r| r.label == "All") else {
            problems.push(format!("tree {seed}: no All variant"));
            continue;
        };
        if !(all.report.d > set.baseline.report.d) {
            problems.push(format!("tree {seed}: D_all {:.4} <= D_none {:.4}", all.report.d, set.baseline.report.d));
        }
        for r in &set.reports {
            if r.report.v_norm > 1.0 || r.report.l_norm > 1.0 {
                problems.push(format!("tree {seed} {}: V~ {:.3}, L~ {:.3}", r.label, r.report.v_norm, r.report.l_norm));
            }
        }
        gains.push(100.0 * (all.report.d - set.baseline.report.d) / set.baseline.report.d.abs());
    }
    let mean = gains.iter().sum::<f64>() / gains.len().max(1) as f64;
    let shown: Vec<String> = gains.iter().map(|g| format!("{g:+.1}%")).collect();
    outcome(
        gains.len() >= 5 && problems.is_empty() && mean >= 5.0,
        format!("{} trees, All-variant D change [{}], mean {mean:+.1}%; problems: {problems:?}", gains.len(), shown.join(", ")),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walk(dir) {
        out.insert(e.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&e).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = generate_tree(&SynthParams { depth: 4, seed: 3, ..Default::default() }).unwrap();
    let scan = ScanConfig {
        angular_resolution: 0.8,
        seed: 3,
        ..Default::default()
    };
    let cloud = scan_single_tree(&mesh, &scan, 6.0, 1.6).unwrap();
    let tree = tmp.path().join("tree.csv");
    save_cloud(&cloud, &tree, CloudFormat::CsvAscii).unwrap();
    let tip = cloud
        .positions()
        .max_by(|a, b| a.xy().norm().total_cmp(&b.xy().norm()))
        .unwrap();
    let cuts = tmp.path().join("cuts.csv");
    std::fs::write(&cuts, format!("x,y,z\n{},{},{}\n", tip.x, tip.y, tip.z)).unwrap();
    let config = tmp.path().join("canopy.toml");
    std::fs::write(
        &config,
        "seed = 11\n[benchmark]\nspacings = [3.0, 8.0]\nreplicates = 2\nangular_resolution = 0.8\n[benchmark.tree]\ndepth = 4\n",
    )
    .unwrap();

    let run = |out: &Path| -> Result<(), String> {
        let p = |x: &Path| x.to_str().unwrap().to_string();
        let jobs: Vec<Vec<String>> = vec![
            vec!["score".into(), p(&tree), "-o".into(), p(&out.join("score.csv"))],
            vec!["score".into(), p(&tree), "--format".into(), "json".into(), "-o".into(), p(&out.join("score.json"))],
            vec!["prune".into(), p(&tree), "--cuts".into(), p(&cuts), "--out-dir".into(), p(&out.join("prune"))],
            vec!["suggest".into(), p(&tree), "--out-dir".into(), p(&out.join("suggest"))],
            vec!["benchmark".into(), "--out-dir".into(), p(&out.join("benchmark"))],
        ];
        std::fs::create_dir_all(out).unwrap();
        for (i, mut args) in jobs.into_iter().enumerate() {
            args.insert(0, "canopy".into());
            args.extend(["-c".into(), p(&config)]);
            let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
            if run_cli(&args, &mut stdout, &mut stderr) != 0 {
                return Err(format!("{} failed: {}", args[1], String::from_utf8_lossy(&stderr)));
            }
            std::fs::write(out.join(format!("{i}-{}.stdout", args[1])), stdout).unwrap();
        }
        Ok(())
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if let Err(e) = run(&a).and_then(|_| run(&b)) {
        return outcome(false, e);
    }
    let (fa, fb) = (files(&a), files(&b));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    outcome(
        fa.len() == fb.len() && differing.is_empty(),
        format!("5 commands run twice, {} output files compared, differing: {differing:?}", fa.len()),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: &[Criterion] = &[
        ("score identity (printed rows, ±0.001)", score_identity),
        ("score identity (rounding-aware, supplementary)", score_identity_rounding),
        ("D response function", d_response),
        ("prune oracle equivalence (exhaustive, <=8 nodes)", prune_oracle),
        ("light conservation and attenuation", light_conservation),
        ("CLI determinism", cli_determinism),
        ("suggestion improves distribution", suggestion),
        ("F1 benchmark", f1_benchmark),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("acceptance {verdict} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance N/A yield correlation R² (0.615 avocado, 0.506 mango): not reproducible without orchard yield data; covered by the property criteria above");
    println!("acceptance summary: {failed} failing");
    if failed > 0 {
        std::process::exit(1);
    }
}
