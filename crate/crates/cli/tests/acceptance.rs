//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and runtime budgets are pinned below.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regularity_cli::config::ExperimentConfig;
use regularity_cli::{compare, data, experiments};
use sample_regularity::dataset::{split, synth_mixture, Split};
use sample_regularity::density::{default_radius, density_map, neighbor_counts, RepresentationPoint};
use sample_regularity::selection::{angular_bins, stratified_sample};
use sample_regularity::stats::run_correlation;
use sample_regularity::trace::{AccuracyTrace, Role};
use sample_regularity::trainer::{adagrad_step, adamax_step, train_and_trace, Activation, Mlp, ModelSpec};

const GRADIENT_REL_TOL: f64 = 1e-4;
const OPTIMIZER_TOL: f64 = 1e-12;
const PRUNE_MAX_LOSS: f64 = 0.03;
const COMPRESS_MIN_SPEARMAN: f64 = 0.8;
const CROSS_RUN_MIN_CORR: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Runs a criterion, enforcing its runtime budget.
fn check(n: usize, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            o.pass = false;
            o.detail.push_str(&format!("; over the {}s budget", b.as_secs()));
        }
    }
    println!(
        "criterion {n:>2}: {} {} ({:.2}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn naive_counts(row: &[u8]) -> (usize, usize) {
    let mut correct = 0;
    let mut events = 0;
    let mut previous = None;
    for &b in row {
        if b == 1 {
            correct += 1;
        }
        if previous == Some(1) && b == 0 {
            events += 1;
        }
        previous = Some(b);
    }
    (correct, events)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=200);
        let p: f64 = rng.random();
        let row: Vec<u8> = (0..len).map(|_| u8::from(rng.random_bool(p))).collect();
        let trace = AccuracyTrace::from_rows(Role::Train, std::slice::from_ref(&row)).unwrap();
        for t in 1..=len {
            let expect = naive_counts(&row[..t]);
            let got = (
                trace.cumulative_binary_loss(0, t).unwrap(),
                trace.event_count(0, t).unwrap(),
            );
            if got != expect {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("1000 rows, every prefix; {mismatches} mismatches"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let depth = rng.random_range(0..=2);
        let spec = ModelSpec {
            hidden_widths: (0..depth).map(|_| rng.random_range(1..=6)).collect(),
            activation: if rng.random_bool(0.5) { Activation::Tanh } else { Activation::Relu },
            init_scale: rng.random_range(0.1..1.0),
        };
        let dim = rng.random_range(1..=5);
        let classes = rng.random_range(2..=4);
        let batch = rng.random_range(1..=8);
        let mut model = Mlp::from_seed(&spec, dim, classes, draw).unwrap();
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ys: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let (_, grad) = model.loss_and_grad(&refs, &ys).unwrap();
        let h = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let p = model.params[i];
            model.params[i] = p + h;
            let up = model.loss(&refs, &ys);
            model.params[i] = p - h;
            let down = model.loss(&refs, &ys);
            model.params[i] = p;
            let numeric = (up - down) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst < GRADIENT_REL_TOL,
        format!("100 draws, max relative error {worst:.2e} (< {GRADIENT_REL_TOL:e})"),
    )
}

fn criterion_3() -> Outcome {
    let mut p = [1.0];
    let mut accum = [0.0];
    adagrad_step(&mut p, &[2.0], &mut accum, 0.1, 1e-8).unwrap();
    let adagrad_expect = 1.0 - 0.1 * 2.0 / (4.0f64 + 1e-8).sqrt();
    let adagrad_err = (p[0] - adagrad_expect).abs().max((accum[0] - 4.0).abs());

    let mut q = [0.5];
    let (mut m, mut u, mut t) = ([0.0], [0.0], 0);
    adamax_step(&mut q, &[1.0], &mut m, &mut u, &mut t, 0.1, 0.9, 0.999, 1e-8).unwrap();
    let adamax_err = (q[0] - 0.4).abs().max((u[0] - 1.0).abs());
    outcome(
        adagrad_err <= OPTIMIZER_TOL && adamax_err <= OPTIMIZER_TOL,
        format!("adagrad error {adagrad_err:.1e}, adamax error {adamax_err:.1e} (<= {OPTIMIZER_TOL:e})"),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_4(tmp: &Path) -> Outcome {
    let config = tmp.join("det.toml");
    std::fs::write(
        &config,
        "[dataset]\nn_per_class = 60\n\n[train]\nepochs = 15\n\n[experiment]\nrepetitions = 2\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = tmp.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_regularity"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (run("det_a"), run("det_b"));
    let traces: Vec<PathBuf> = files_under(&a)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "trace"))
        .collect();
    let identical = traces
        .iter()
        .all(|p| std::fs::read(a.join(p)).unwrap() == std::fs::read(b.join(p)).unwrap());
    outcome(
        identical && traces.len() == 4 && files_under(&a) == files_under(&b),
        format!("{} trace files compared byte for byte", traces.len()),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<RepresentationPoint> = (0..2000)
        .map(|i| RepresentationPoint {
            sample_id: i,
            // Integer-valued clusters produce many exact boundary distances.
            x: if i % 2 == 0 { rng.random_range(0..60) as f64 } else { rng.random_range(0.0..60.0) },
            y: if i % 2 == 0 { rng.random_range(0..15) as f64 } else { rng.random_range(0.0..15.0) },
        })
        .collect();
    let mut agree = true;
    for r in [0.5, 1.0, 2.0, 3.7] {
        let brute: Vec<usize> = points
            .iter()
            .map(|p| {
                points
                    .iter()
                    .filter(|q| ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt() <= r)
                    .count()
            })
            .collect();
        let map = density_map(&points, r).unwrap();
        let area = std::f64::consts::PI * r * r;
        agree &= neighbor_counts(&points, r) == brute
            && map.values.iter().zip(&brute).all(|(v, &c)| *v == c as f64 / area);
    }
    let unit = default_radius(30.0, 0.0).unwrap();
    let y_star = 30.0 * (6.8f64.powi(2) - (200.0f64 / 30.0).powi(2)).sqrt();
    let r_star = default_radius(200.0, y_star).unwrap();
    outcome(
        agree && unit == 1.0 && (r_star - 6.8).abs() <= 0.05,
        format!("grid == brute force at 4 radii: {agree}; r(30,0) = {unit}; r(200, {y_star:.3}) = {r_star:.4}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let points: Vec<RepresentationPoint> = (0..10_000)
        .map(|i| RepresentationPoint {
            sample_id: i,
            x: rng.random_range(0..=60) as f64,
            y: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0..=12) as f64 },
        })
        .collect();
    let binning = angular_bins(&points, 18.0).unwrap();
    let sizes = binning.bin_sizes();
    let partition = binning.bins.len() == points.len()
        && binning.bins.iter().all(|&b| b < binning.n_bins())
        && sizes.iter().sum::<usize>() == points.len();

    let n = 7;
    let others_full = sizes[1..].iter().all(|&s| s >= n);
    let take_all: BTreeSet<usize> = [0].into();
    let picked = stratified_sample(&binning, n, &take_all, 6).unwrap();
    let expect = sizes[0] + 11 * n;
    outcome(
        partition && others_full && binning.n_bins() == 12 && picked.len() == expect,
        format!(
            "10000 points in {} bins, sizes sum {}; |bin0| + 11n = {} + {} = {}, sampled {}",
            binning.n_bins(),
            sizes.iter().sum::<usize>(),
            sizes[0],
            11 * n,
            expect,
            picked.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig::default();
    let (_, spec) = cfg.primary_model().unwrap();
    let d = &cfg.dataset;
    let mut good = 0;
    let mut details = Vec::new();
    for seed in 0..5u64 {
        let ds = split(
            &synth_mixture(d.classes, d.n_per_class, d.dim, d.separation, 0.1, seed).unwrap(),
            d.train_frac,
            seed,
        )
        .unwrap();
        let run = train_and_trace(&ds, &spec, &cfg.train_config(seed).unwrap()).unwrap();
        let noisy: BTreeSet<usize> = ds.irregular_ids().iter().copied().collect();
        let (mut n_sum, mut c_sum) = ([0.0; 2], [0.0; 2]);
        let (mut n_count, mut c_count) = (0.0, 0.0);
        for (r, id) in run.train_trace.regularity_records().iter().zip(ds.indices_of(Split::Train)) {
            let (sum, count) = if noisy.contains(&id) { (&mut n_sum, &mut n_count) } else { (&mut c_sum, &mut c_count) };
            sum[0] += r.cumulative_loss as f64;
            sum[1] += r.event_count as f64;
            *count += 1.0;
        }
        let (nl, ne) = (n_sum[0] / n_count, n_sum[1] / n_count);
        let (cl, ce) = (c_sum[0] / c_count, c_sum[1] / c_count);
        if nl < cl && ne > ce {
            good += 1;
        }
        details.push(format!("cbtl {nl:.1}/{cl:.1} events {ne:.2}/{ce:.2}"));
    }
    outcome(
        good >= 4,
        format!("noisy vs clean separated in {good}/5 seeds [{}]", details.join("; ")),
    )
}

fn criterion_8(tmp: &Path) -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.prune.fractions = vec![0.0, 0.6];
    cfg.prune.radius = 1.0;
    cfg.prune.seeds = (0..5).collect();
    let table = experiments::prune_eval(&cfg, &tmp.join("prune")).unwrap();
    let baseline = table.get("density_r1", 0.0).unwrap();
    let density = table.get("density_r1", 0.6).unwrap();
    let random = table.get("random", 0.6).unwrap();
    let loss = baseline - density;
    outcome(
        loss <= PRUNE_MAX_LOSS && density > random,
        format!(
            "baseline {baseline:.4}, density r=1 at 0.6 {density:.4} (loss {:.2} pt), random at 0.6 {random:.4}",
            100.0 * loss
        ),
    )
}

fn criterion_9(tmp: &Path) -> Outcome {
    let mut cfg = ExperimentConfig::default();
    let saturated = 1_000_000;
    cfg.compress.n_per_bin = vec![1, 2, 5, 10, 20, 50, 100, 200, saturated];
    cfg.compress.seeds = (0..5).collect();
    let report = experiments::compress_test(&cfg, &tmp.join("compress")).unwrap();
    let curve: Vec<(usize, f64, f64)> = report
        .n_per_bin
        .iter()
        .map(|&n| {
            let (s, _, _) = experiments::mean_fidelity(&report.cells, n);
            let size = report.cells.iter().filter(|c| c.n_per_bin == n).map(|c| c.size as f64).sum::<f64>() / 5.0;
            (n, s, size)
        })
        .collect();
    let (best_n, best, best_size) = curve
        .iter()
        .filter(|&&(_, s, size)| s.is_finite() && size < report.test_size as f64)
        .fold((0, f64::NEG_INFINITY, 0.0), |acc, &(n, s, size)| if s > acc.1 { (n, s, size) } else { acc });
    let saturation_exact = report
        .cells
        .iter()
        .filter(|c| c.n_per_bin == saturated)
        .all(|c| c.spearman == 1.0 && c.size == report.test_size);
    let first = curve[0].1;
    let endpoints = (first.is_nan() || first <= 1.0) && saturation_exact;
    let shown: Vec<String> = curve[..curve.len() - 1]
        .iter()
        .map(|(n, s, _)| format!("{n}:{s:.2}"))
        .collect();
    outcome(
        best >= COMPRESS_MIN_SPEARMAN && endpoints,
        format!(
            "best n_per_bin {best_n} spearman {best:.3} on {best_size:.0}/{} samples; curve [{}]; saturation exactly 1: {saturation_exact}",
            report.test_size,
            shown.join(" ")
        ),
    )
}

fn criterion_10(tmp: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let ones = run_correlation(&vec![v; 4]).unwrap().entries.iter().all(|&e| e == 1.0);

    let mut cfg = ExperimentConfig::default();
    cfg.experiment.repetitions = 5;
    let out = tmp.join("cross");
    let summary = data::run(&cfg, &out).unwrap();
    let dirs: Vec<PathBuf> = summary.runs.iter().map(|r| r.dir.clone()).collect();
    let cmp = compare::compare_runs(&dirs, Role::Train, None, &tmp.join("cross_cmp")).unwrap();
    let mean = cmp.matrix.off_diagonal_mean();
    outcome(
        ones && mean > CROSS_RUN_MIN_CORR,
        format!(
            "identical vectors give all ones: {ones}; 5 seeded runs, radius {:.3}, off-diagonal mean {mean:.3}",
            cmp.radius
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let secs = Duration::from_secs;
    let results = [
        check(1, Some(secs(1)), criterion_1),
        check(2, Some(secs(10)), criterion_2),
        check(3, None, criterion_3),
        check(4, None, || criterion_4(t)),
        check(5, None, criterion_5),
        check(6, None, criterion_6),
        check(7, Some(secs(120)), criterion_7),
        check(8, Some(secs(180)), || criterion_8(t)),
        check(9, Some(secs(180)), || criterion_9(t)),
        check(10, None, || criterion_10(t)),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
