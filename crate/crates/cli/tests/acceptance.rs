//! Acceptance suite. Each test prints one `PASS` or `FAIL` line for its
//! criterion to stderr (uncaptured) and then asserts it.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use otreg::data::{self, Builtin, Dataset};
use otreg::eval::{self, EvalConfig, ParzenEstimator};
use otreg::generator::{backward, forward, standard_normal, GeneratorParams, Phase};
use otreg::lap::{self, CostMatrix};
use otreg::trainer::{self, TrainConfig};
use otreg::transport::{self, Grouping, Mode, SampleSet, TransportConfig, TransportPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, pass: bool, detail: &str) -> bool {
    let line = format!("{} criterion {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn otreg_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_otreg"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "otreg {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CostMatrix {
    CostMatrix::new(n, (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect()).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, rows: usize, n: usize, m: usize) -> SampleSet {
    let x = (0..rows * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y = (0..rows * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
    SampleSet::new(n, m, x, y).unwrap()
}

#[test]
fn criterion_01_lap_exactness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let n = 2 + (case as usize % 7);
        let m = random_matrix(&mut rng, n);
        let a = lap::solve_dense(&m);
        let b = lap::brute_force(&m).unwrap();
        assert!(a.is_permutation());
        worst = worst.max((a.total_cost - b.total_cost).abs() / b.total_cost.abs().max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 5.0;
    assert!(report(
        "1 (LAP exactness)",
        pass,
        &format!("200 matrices n=2..8, max relative gap {worst:.2e} (<= 1e-9), {secs:.3}s (< 5s)")
    ));
}

#[test]
fn criterion_02_sparse_dense_agreement() {
    let mut worst_full = 0.0f64;
    let mut pruned_violations = 0;
    let mut pruned = 0;
    for case in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let uniques = rng.gen_range(3..12);
        let ss = rng.gen_range(1..5);
        let (n, m) = (rng.gen_range(1..4), rng.gen_range(1..3));
        let base = random_set(&mut rng, uniques, n, m);
        let order: Vec<usize> = (0..uniques * ss).map(|i| i / ss).collect();
        let reals = base.select(&order);
        let fy: Vec<f64> = (0..uniques * ss * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fakes = SampleSet::new(n, m, reals.x_values().to_vec(), fy).unwrap();
        let grouping = Grouping::repeated(uniques, ss);
        let cfg = TransportConfig {
            lambda: rng.gen_range(0.0..1.0),
            p: if case % 2 == 0 { 1.0 } else { 2.0 },
            k_neighbors: uniques,
            n,
            m,
        };
        let (dense, _) = transport::ot_cost_and_plan(&reals, &fakes, &cfg, Mode::Dense, None).unwrap();
        let (full, _) = transport::ot_cost_and_plan(&reals, &fakes, &cfg, Mode::Sparse, Some(&grouping)).unwrap();
        worst_full = worst_full.max((full - dense).abs() / dense.max(1e-300));
        for k in 1..uniques {
            let c = TransportConfig { k_neighbors: k, ..cfg };
            let (s, _) = transport::ot_cost_and_plan(&reals, &fakes, &c, Mode::Sparse, Some(&grouping)).unwrap();
            pruned += 1;
            if s < dense - 1e-12 * dense.max(1.0) {
                pruned_violations += 1;
            }
        }
    }
    // matrix-level pruning with arbitrary patterns
    for case in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + case);
        let n = rng.gen_range(2..30);
        let m = random_matrix(&mut rng, n);
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j == i || rng.gen::<f64>() < 0.4)
                    .map(|j| (j, m.get(i, j)))
                    .collect()
            })
            .collect();
        let s = lap::solve_sparse(&lap::SparseCostMatrix::from_rows(n, rows).unwrap()).unwrap();
        pruned += 1;
        if s.total_cost < lap::solve_dense(&m).total_cost - 1e-9 {
            pruned_violations += 1;
        }
    }
    let pass = worst_full <= 1e-9 && pruned_violations == 0;
    assert!(report(
        "2 (sparse/dense agreement)",
        pass,
        &format!(
            "50 full-pattern instances, max relative gap {worst_full:.2e} (<= 1e-9); {pruned_violations} of {pruned} pruned instances below dense"
        )
    ));
}

/// Central difference with the largest step in a ladder on which `f` is
/// smooth (one-sided slopes agree), so ReLU kinks are not straddled.
fn smooth_difference(f: impl Fn(f64) -> f64) -> f64 {
    let f0 = f(0.0);
    let mut last = 0.0;
    for h in [1e-5, 1e-6, 1e-7, 1e-8] {
        let (up, down) = (f(h), f(-h));
        let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
        last = (up - down) / (2.0 * h);
        if (fwd - bwd).abs() <= 1e-5 * fwd.abs().max(bwd.abs()).max(1e-2) {
            break;
        }
    }
    last
}

fn fixed_plan_loss(
    params: &GeneratorParams,
    flat: &[f64],
    reals: &SampleSet,
    z: &Array2<f64>,
    plan: &TransportPlan,
    cfg: &TransportConfig,
) -> f64 {
    let mut q = params.clone();
    q.set_flat_trainable(flat).unwrap();
    let x = Array2::from_shape_vec((reals.len(), reals.x_dim()), reals.x_values().to_vec()).unwrap();
    let (y, _) = forward(&mut q, x.view(), z.view(), Phase::Train).unwrap();
    let fakes = SampleSet::new(reals.x_dim(), cfg.m, reals.x_values().to_vec(), y.into_raw_vec_and_offset().0).unwrap();
    transport::plan_cost(reals, &fakes, plan, cfg)
}

#[test]
fn criterion_03_gradient_fidelity() {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let configs = 20u64;
    for case in 0..configs {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + case);
        let (n, m, k) = (1 + case as usize % 3, 1 + (case as usize / 3) % 3, 1 + (case as usize / 9) % 3);
        let rows = 8;
        let params = GeneratorParams::init(n, m, k, &mut rng).unwrap();
        let reals = random_set(&mut rng, rows, n, m);
        let z = standard_normal((rows, k), &mut rng);
        let cfg = TransportConfig {
            lambda: rng.gen_range(0.1..0.9),
            p: 2.0,
            k_neighbors: 1,
            n,
            m,
        };
        let x = Array2::from_shape_vec((rows, n), reals.x_values().to_vec()).unwrap();
        let mut q = params.clone();
        let (y, cache) = forward(&mut q, x.view(), z.view(), Phase::Train).unwrap();
        let fakes = SampleSet::new(n, m, reals.x_values().to_vec(), y.into_raw_vec_and_offset().0).unwrap();
        let (_, plan) = transport::ot_cost_and_plan(&reals, &fakes, &cfg, Mode::Dense, None).unwrap();
        let dl_dy = Array2::from_shape_vec((rows, m), transport::plan_gradient(&reals, &fakes, &plan, &cfg)).unwrap();
        let grad = backward(&params, &cache, dl_dy.view()).unwrap().flat_trainable();
        let flat = params.flat_trainable();
        for i in 0..flat.len() {
            let fd = smooth_difference(|t| {
                let mut v = flat.clone();
                v[i] += t;
                fixed_plan_loss(&params, &v, &reals, &z, &plan, &cfg)
            });
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let pass = worst < 1e-4;
    assert!(report(
        "3 (gradient fidelity)",
        pass,
        &format!("{configs} configurations (batch 8, dims 1-3, p=2), {checked} parameters, max relative error {worst:.2e} (< 1e-4)")
    ));
}

fn standardized(b: Builtin) -> Dataset {
    let raw = b.generate(data::DEFAULT_ROWS, 0).unwrap();
    data::standardize(&raw).unwrap().0
}

fn cv_defaults(b: Builtin) -> (eval::MetricsReport, f64) {
    let start = Instant::now();
    let d = standardized(b);
    let report = eval::cross_validate(&d, &TrainConfig::default(), &EvalConfig::default()).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn fold_summary(r: &eval::MetricsReport) -> String {
    let epochs: Vec<String> = r.folds.iter().map(|f| f.epochs.to_string()).collect();
    format!(
        "NLPD {:.3} ± {:.3}, MAE {:.3}, MSE {:.3} ± {:.3}, epochs per fold [{}]",
        r.mean.nlpd,
        r.std.nlpd,
        r.mean.mae,
        r.mean.mse,
        r.std.mse,
        epochs.join(", ")
    )
}

#[test]
fn criterion_04_sinus() {
    let (r, secs) = cv_defaults(Builtin::Sinus);
    let pass = (0.25..=0.55).contains(&r.mean.nlpd) && (0.12..=0.18).contains(&r.mean.mse) && secs <= 1200.0;
    assert!(report(
        "4 (sinus)",
        pass,
        &format!(
            "{}; need NLPD in [0.25, 0.55] and MSE in [0.12, 0.18]; {secs:.0}s (<= 1200s)",
            fold_summary(&r)
        )
    ));
}

#[test]
fn criterion_05_exp() {
    let (r, secs) = cv_defaults(Builtin::Exp);
    let pass = r.mean.nlpd < 0.45;
    assert!(report("5 (exp)", pass, &format!("{}; need NLPD < 0.45; {secs:.0}s", fold_summary(&r))));
}

#[test]
fn criterion_06_heteroscedastic() {
    let (r, secs) = cv_defaults(Builtin::Heteroscedastic);
    let pass = r.mean.nlpd < 0.0;
    assert!(report(
        "6 (heteroscedastic)",
        pass,
        &format!("{}; need NLPD < 0.0; {secs:.0}s", fold_summary(&r))
    ));
}

#[test]
fn criterion_07_multimodal() {
    let (r, secs) = cv_defaults(Builtin::Multimodal);
    let nlpd_ok = r.mean.nlpd < 0.2;

    let raw = Builtin::Multimodal.generate(data::DEFAULT_ROWS, 0).unwrap();
    let (d, stats) = data::standardize(&raw).unwrap();
    let (outcome, _) = trainer::train(&d, &TrainConfig::default()).unwrap();
    let grid: Vec<f64> = (0..10).map(|i| 0.02 + 0.036 * i as f64).collect();
    let per_x = 500;
    let (mut near, mut lower, mut upper) = (0usize, 0usize, 0usize);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &x in &grid {
        let xs = stats.forward_x(&[x]);
        let draws = outcome.params.sample(&xs, per_x, &mut rng).unwrap();
        let band = 5.0 * data::multimodal_noise(x);
        for y in draws {
            let y = stats.inverse_y(&y)[0];
            let (a, b) = (data::multimodal_line(x, true), data::multimodal_line(x, false));
            if (y - a).abs() <= band {
                near += 1;
                lower += 1;
            } else if (y - b).abs() <= band {
                near += 1;
                upper += 1;
            }
        }
    }
    let total = grid.len() * per_x;
    let frac = near as f64 / total as f64;
    let pass = nlpd_ok && frac >= 0.7;
    assert!(report(
        "7 (multi-modal)",
        pass,
        &format!(
            "{}; need NLPD < 0.2; {:.1}% of {total} samples at x < 0.4 within 5 noise-stds of a line (need >= 70%), split {lower}/{upper}; {secs:.0}s",
            fold_summary(&r),
            100.0 * frac
        )
    ));
}

#[test]
fn criterion_08_sparse_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    otreg_cli(&["lap-bench", "--k-neighbors", "10", "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    let find = |mode: &str, batch: &str, ss: &str| {
        rows.iter()
            .find(|r| r[0] == mode && r[1] == batch && r[2] == ss)
            .map(|r| (r[3].parse::<f64>().unwrap(), r[4].parse::<f64>().unwrap()))
            .unwrap()
    };
    let (_, dense_solve) = find("dla", "256", "16");
    let (_, sparse_solve) = find("sla", "256", "16");
    let mut build_ok = true;
    let mut builds = Vec::new();
    for r in rows.iter().filter(|r| r[0] == "dla") {
        let (db, _) = find("dla", &r[1], &r[2]);
        let (sb, _) = find("sla", &r[1], &r[2]);
        build_ok &= sb < db;
        builds.push(format!("{}x{} {:.1}x", r[1], r[2], db / sb));
    }
    let ratio = dense_solve / sparse_solve;
    let pass = ratio >= 5.0 && build_ok;
    assert!(report(
        "8 (sparse speedup)",
        pass,
        &format!(
            "batch 256 x sample-size 16: dense solve {dense_solve:.3}s, sparse {sparse_solve:.3}s, {ratio:.1}x (need >= 5x); build speedups [{}] (need all > 1x)",
            builds.join(", ")
        )
    ));
}

fn ablation_nlpd(d: &Dataset, batch: usize, ss: usize) -> f64 {
    let seeds = [0u64, 1, 2];
    let total: f64 = seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig {
                mode: Mode::Sparse,
                batch_size: batch,
                sample_size: ss,
                seed,
                ..TrainConfig::default()
            };
            let (outcome, _) = trainer::train(d, &cfg).unwrap();
            outcome.history.best().unwrap().val_nlpd
        })
        .sum();
    total / seeds.len() as f64
}

#[test]
fn criterion_09_ablation_trend() {
    let start = Instant::now();
    let raw = data::gen_mixture_density(0).unwrap();
    let d = data::standardize(&raw).unwrap().0;
    let small = ablation_nlpd(&d, 32, 1);
    let large = ablation_nlpd(&d, 256, 1);
    let many = ablation_nlpd(&d, 256, 8);
    let pass = large < small && many < large;
    assert!(report(
        "9 (ablation trend)",
        pass,
        &format!(
            "mixture, mean over 3 seeds of validation NLPD: batch 32/ss 1 {small:.3}, batch 256/ss 1 {large:.3}, batch 256/ss 8 {many:.3} (need 256 < 32 and ss 8 < ss 1); {:.0}s",
            start.elapsed().as_secs_f64()
        )
    ));
}

fn naive_log_density(samples: &[f64], dim: usize, sigma: f64, y: &[f64]) -> f64 {
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-(dim as f64) / 2.0);
    let count = samples.len() / dim;
    let mut total = 0.0;
    for s in samples.chunks(dim) {
        let d2: f64 = s.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        total += norm * (-d2 / (2.0 * sigma * sigma)).exp();
    }
    (total / count as f64).ln()
}

#[test]
fn criterion_10_parzen() {
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + case);
        let dim = rng.gen_range(1..4);
        let count = rng.gen_range(1..60);
        let sigma = 10f64.powf(rng.gen_range(-0.7..0.5));
        let samples: Vec<f64> = (0..count * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let est = ParzenEstimator::new(samples.clone(), dim, sigma).unwrap();
        let got = eval::parzen_log_density(&est, &y).unwrap();
        worst = worst.max((got - naive_log_density(&samples, dim, sigma, &y)).abs());
    }
    let single = eval::parzen_log_density(&ParzenEstimator::new(vec![0.0], 1, 0.5).unwrap(), &[1.0]).unwrap();
    let closed = -2.0 - 0.5 * (std::f64::consts::PI / 2.0).ln();
    let pass = worst <= 1e-10 && single == closed;
    assert!(report(
        "10 (Parzen correctness)",
        pass,
        &format!(
            "200 random cases, max deviation from naive sum {worst:.2e} (<= 1e-10); single Gaussian {single} vs closed form {closed}"
        )
    ));
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let quick = [
        "--rows",
        "600",
        "--max-epochs",
        "3",
        "--val-draws",
        "50",
        "--draws",
        "200",
        "--seed",
        "5",
        "--no-timings",
    ];
    let mut same = Vec::new();
    for attempt in ["a", "b"] {
        let out = dir.path().join(attempt);
        let out = out.to_str().unwrap();
        let mut train = vec!["train", "--dataset", "multimodal", "--out-dir", out, "--tag", "t"];
        train.extend(quick);
        otreg_cli(&train);
        let ck = format!("{out}/run_t/checkpoint");
        otreg_cli(&["eval", "--checkpoint", &ck, "--dataset", "multimodal", "--rows", "300", "--draws", "300", "--seed", "2"]);
        let mut cv = vec!["cv", "--dataset", "heteroscedastic", "--mode", "sla", "--out-dir", out, "--tag", "c"];
        cv.extend(quick);
        otreg_cli(&cv);
    }
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for file in ["run_t/history.csv", "run_t/checkpoint", "run_t/metrics.json", "run_t/cloud.csv", "run_c/metrics.json"] {
        same.push((file, read(&a.join(file)) == read(&b.join(file))));
    }
    let pass = same.iter().all(|(_, s)| *s);
    let detail: Vec<String> = same
        .iter()
        .map(|(f, s)| format!("{f} {}", if *s { "identical" } else { "differs" }))
        .collect();
    assert!(report("11 (determinism)", pass, &detail.join(", ")));
}

#[test]
fn csv_standin_cv_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("standin.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut text = String::from("f0,f1,f2,target\n");
    for _ in 0..1000 {
        let x: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..5.0), rng.gen_range(-3.0..3.0)];
        let noise: f64 = rng.gen_range(-0.3..0.3);
        let y = x[0] * x[1] + x[2].sin() + noise * (1.0 + x[0].abs());
        text.push_str(&format!("{},{},{},{}\n", x[0], x[1], x[2], y));
    }
    std::fs::write(&csv, text).unwrap();
    let start = Instant::now();
    let out = dir.path().to_str().unwrap();
    otreg_cli(&["cv", "--dataset", csv.to_str().unwrap(), "--targets", "target", "--out-dir", out, "--tag", "csv"]);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_csv/metrics.json")).unwrap()).unwrap();
    let folds = m["folds"].as_array().map(Vec::len).unwrap_or(0);
    let nlpd = m["mean"]["nlpd"].as_f64().unwrap_or(f64::NAN);
    let pass = folds == 5 && nlpd.is_finite();
    assert!(report(
        "CSV stand-in (1000-row cv run)",
        pass,
        &format!("{folds} folds, mean NLPD {nlpd:.3}, {:.0}s", start.elapsed().as_secs_f64())
    ));
}
