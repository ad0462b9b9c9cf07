//! `otreg` command-line driver.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use otreg::data::{self, Builtin, Dataset, Standardization, TargetColumns};
use otreg::eval::{self, EvalConfig, FoldReport, MetricsReport};
use otreg::generator::{standard_normal, Checkpoint};
use otreg::lap;
use otreg::trainer::{self, TrainConfig};
use otreg::transport::{build_dense_cost, build_sparse_cost, Grouping, Mode, SampleSet, TransportConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "otreg", version, about = "Regression with an implicit noise model trained by optimal transport")]
#[command(args_override_self = true)]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a built-in synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Train a generator and write its checkpoint and history.
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics JSON and a generated sample cloud.
    Eval(EvalArgs),
    /// k-fold cross-validation, optionally over a grid of lambda values.
    Cv(CvArgs),
    /// Time cost-matrix construction and assignment solving per mode.
    LapBench(LapBenchArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// sinus, exp, heteroscedastic, multimodal or mixture.
    name: String,
    #[arg(long, default_value_t = data::DEFAULT_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Built-in dataset name or path to a CSV file.
    #[arg(long)]
    dataset: String,
    /// Rows generated for a built-in dataset.
    #[arg(long, default_value_t = data::DEFAULT_ROWS)]
    rows: usize,
    /// Seed of a built-in dataset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Comma-separated target columns of a CSV (default: columns prefixed `y_`).
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// dla (dense assignment) or sla (sparse, nearest neighbours).
    #[arg(long, default_value = "dla")]
    mode: String,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 10)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    /// Generator draws per validation row for the per-epoch NLPD.
    #[arg(long, default_value_t = 200)]
    val_draws: usize,
    #[arg(long, default_value_t = 1)]
    noise_dim: usize,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Run directory name suffix (default: current unix time).
    #[arg(long)]
    tag: Option<String>,
    /// Write zero in the history's time columns.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Generator draws per row for the bandwidth selection.
    #[arg(long, default_value_t = eval::DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = eval::DEFAULT_DRAWS)]
    draws: usize,
    /// Generated samples per input in the cloud CSV.
    #[arg(long, default_value_t = 10)]
    cloud_samples: usize,
    /// Use this many evenly spaced inputs for the cloud (one-dimensional x
    /// only) instead of the dataset rows.
    #[arg(long)]
    cloud_grid: Option<usize>,
    /// Override the checkpoint's bandwidth.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    trim_lo: f64,
    #[arg(long, default_value_t = 0.75)]
    trim_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: the checkpoint's directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = eval::DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = 0.25)]
    trim_lo: f64,
    #[arg(long, default_value_t = 0.75)]
    trim_hi: f64,
    /// Seed of the fold assignment and evaluation draws.
    #[arg(long, default_value_t = 0)]
    eval_seed: u64,
    /// Comma-separated lambda values; cross-validates each and keeps the one
    /// with the lowest validation NLPD.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Vec<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LapBenchArgs {
    /// Comma-separated mini-batch sizes (unique reals).
    #[arg(long, value_delimiter = ',', default_value = "256")]
    batches: Vec<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    sample_sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// An error caused by the user's input rather than by the computation.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Invalid>()
            || matches!(
                e.downcast_ref::<otreg::Error>(),
                Some(otreg::Error::Config(_) | otreg::Error::Dimension(_) | otreg::Error::Data(_) | otreg::Error::Csv(_))
            )
    })
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::expand(&Cli::command(), raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => evaluate(a),
        Command::Cv(a) => cv(a),
        Command::LapBench(a) => lap_bench(a),
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let builtin: Builtin = a.name.parse()?;
    let d = builtin.generate(a.rows, a.seed)?;
    data::save_csv(&d, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{}: {} rows, columns {}",
        a.out.display(),
        d.len(),
        d.x_names.iter().chain(&d.y_names).cloned().collect::<Vec<_>>().join(",")
    );
    Ok(())
}

fn load_dataset(a: &DataArgs) -> Result<Dataset> {
    match a.dataset.parse::<Builtin>() {
        Ok(b) => Ok(b.generate(a.rows, a.data_seed)?),
        Err(_) if Path::new(&a.dataset).exists() || a.dataset.ends_with(".csv") => {
            let targets = if a.targets.is_empty() {
                TargetColumns::Prefixed
            } else {
                TargetColumns::Named(a.targets.clone())
            };
            Ok(data::load_csv(&a.dataset, &targets)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn train_config(m: &ModelArgs) -> Result<TrainConfig> {
    let mut problems = Vec::new();
    let mode = m.mode.parse::<Mode>().map_err(|e| problems.push(e.to_string())).ok();
    let cfg = TrainConfig {
        mode: mode.unwrap_or(Mode::Dense),
        batch_size: m.batch_size,
        sample_size: m.sample_size,
        lambda: m.lambda,
        p: m.p,
        k_neighbors: m.k_neighbors,
        learning_rate: m.learning_rate,
        patience: m.patience,
        max_epochs: m.max_epochs,
        seed: m.seed,
        validation_fraction: m.validation_fraction,
        val_draws: m.val_draws,
        noise_dim: m.noise_dim,
    };
    if let Err(e) = cfg.validate() {
        problems.push(e.to_string());
    }
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(invalid(problems.join("; ")))
    }
}

fn run_dir(o: &OutputArgs) -> Result<PathBuf> {
    let tag = match &o.tag {
        Some(t) => t.clone(),
        None => SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs().to_string(),
    };
    let dir = o.out_dir.join(format!("run_{tag}"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn stats_meta(ck: &mut Checkpoint, stats: &Standardization) {
    ck.meta.insert("x_mean".into(), stats.x_mean.clone());
    ck.meta.insert("x_std".into(), stats.x_std.clone());
    ck.meta.insert("y_mean".into(), stats.y_mean.clone());
    ck.meta.insert("y_std".into(), stats.y_std.clone());
}

fn stats_from_meta(ck: &Checkpoint) -> Result<Standardization> {
    let get = |k: &str| {
        ck.meta
            .get(k)
            .cloned()
            .ok_or_else(|| invalid(format!("checkpoint has no {k} entry")))
    };
    Ok(Standardization {
        x_mean: get("x_mean")?,
        x_std: get("x_std")?,
        y_mean: get("y_mean")?,
        y_std: get("y_std")?,
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a.model)?;
    if a.draws < 1 {
        return Err(invalid("draws must be >= 1"));
    }
    let raw = load_dataset(&a.data)?;
    let (data, stats) = data::standardize(&raw)?;
    let dir = run_dir(&a.output)?;
    let start = Instant::now();
    let (outcome, val) = trainer::train(&data, &cfg)?;
    let (bandwidth, val_nlpd) = eval::select_bandwidth(
        &outcome.params,
        &val,
        &eval::default_bandwidth_grid(),
        a.draws,
        eval::DEFAULT_TRIM,
        cfg.seed,
    )?;
    let mut ck = Checkpoint::new(outcome.params);
    stats_meta(&mut ck, &stats);
    ck.meta.insert("bandwidth".into(), vec![bandwidth]);
    ck.meta.insert("lambda".into(), vec![cfg.lambda]);
    ck.save(dir.join("checkpoint"))?;
    outcome.history.write_csv(dir.join("history.csv"), !a.output.no_timings)?;
    log::info!("trained in {:.1}s", start.elapsed().as_secs_f64());
    println!(
        "{}: {} epochs (best {}), final validation NLPD {val_nlpd:.6} at bandwidth {bandwidth:.4}",
        dir.display(),
        outcome.history.records.len(),
        outcome.best_epoch
    );
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let trim = (a.trim_lo, a.trim_hi);
    let ecfg = EvalConfig {
        draws: a.draws,
        trim,
        ..EvalConfig::default()
    };
    ecfg.validate()?;
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("reading {}", a.checkpoint.display()))?;
    let raw = load_dataset(&a.data)?;
    let p = &ck.params;
    if raw.x_dim() != p.n || raw.y_dim() != p.m {
        return Err(invalid(format!(
            "dataset has {} inputs and {} targets, checkpoint expects {} and {}",
            raw.x_dim(),
            raw.y_dim(),
            p.n,
            p.m
        )));
    }
    let stats = stats_from_meta(&ck)?;
    let data = stats.apply(&raw)?;
    let bandwidth = match a.bandwidth {
        Some(b) => b,
        None => *ck
            .meta
            .get("bandwidth")
            .and_then(|v| v.first())
            .ok_or_else(|| invalid("checkpoint has no bandwidth; pass --bandwidth"))?,
    };
    let m = eval::evaluate(p, &data.samples, bandwidth, a.draws, trim, a.seed)?;
    let lambda = ck.meta.get("lambda").and_then(|v| v.first()).copied().unwrap_or(f64::NAN);
    let fold = FoldReport {
        nlpd: m.nlpd,
        mae: m.mae,
        mse: m.mse,
        bandwidth,
        val_nlpd: m.nlpd,
        epochs: 0,
        test_rows: data.len(),
    };
    let report = MetricsReport::from_folds(&data.name, "checkpoint", finite_or_zero(lambda), vec![fold], trim, a.draws);
    let dir = match a.out {
        Some(d) => d,
        None => a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("metrics.json"), &report)?;

    let inputs: SampleSet = match a.cloud_grid {
        Some(points) => {
            if p.n != 1 || points < 2 {
                return Err(invalid("--cloud-grid needs one-dimensional inputs and at least 2 points"));
            }
            let xs = data.samples.x_values();
            let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
            SampleSet::new(1, p.m, grid, vec![0.0; points * p.m])?
        }
        None => data.samples.clone(),
    };
    let cloud = cloud_csv(&ck, &inputs, a.cloud_samples, a.seed)?;
    std::fs::write(dir.join("cloud.csv"), cloud)?;
    println!(
        "{}: nlpd {:.6} mae {:.6} mse {:.6} (bandwidth {bandwidth:.4}, {} draws)",
        dir.display(),
        m.nlpd,
        m.mae,
        m.mse,
        a.draws
    );
    Ok(())
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Generated samples on the standardized scale, `x_*` then `y_*` columns.
fn cloud_csv(ck: &Checkpoint, inputs: &SampleSet, samples: usize, seed: u64) -> Result<String> {
    use std::fmt::Write as _;
    if samples < 1 {
        return Err(invalid("cloud-samples must be >= 1"));
    }
    let p = &ck.params;
    let rows = eval::generate_rows(p, inputs, samples, seed ^ 0xc10d)?;
    let mut s = String::new();
    let header: Vec<String> = (0..p.n)
        .map(|i| format!("x_{i}"))
        .chain((0..p.m).map(|j| format!("y_{j}")))
        .collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for (i, draws) in rows.iter().enumerate() {
        let x = inputs.x_row(i);
        for y in draws.chunks(p.m) {
            let cells: Vec<String> = x.iter().chain(y).map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
    }
    Ok(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct SweepEntry {
    lambda: f64,
    mean_val_nlpd: f64,
    report: MetricsReport,
}

#[derive(Serialize)]
struct Sweep {
    selected_lambda: f64,
    entries: Vec<SweepEntry>,
}

fn cv(a: CvArgs) -> Result<()> {
    let base = train_config(&a.model)?;
    let ecfg = EvalConfig {
        draws: a.draws,
        trim: (a.trim_lo, a.trim_hi),
        folds: a.folds,
        seed: a.eval_seed,
        ..EvalConfig::default()
    };
    ecfg.validate()?;
    if let Some(bad) = a.lambda_grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(invalid(format!("lambda-grid value {bad} outside [0, 1]")));
    }
    let raw = load_dataset(&a.data)?;
    let (data, _) = data::standardize(&raw)?;
    let dir = run_dir(&a.output)?;
    let lambdas = if a.lambda_grid.is_empty() {
        vec![base.lambda]
    } else {
        a.lambda_grid.clone()
    };
    let mut entries = Vec::new();
    for &lambda in &lambdas {
        let cfg = TrainConfig { lambda, ..base.clone() };
        let report = eval::cross_validate(&data, &cfg, &ecfg)?;
        println!(
            "lambda {lambda}: nlpd {:.6} ± {:.6}, mae {:.6} ± {:.6}, mse {:.6} ± {:.6}",
            report.mean.nlpd, report.std.nlpd, report.mean.mae, report.std.mae, report.mean.mse, report.std.mse
        );
        entries.push(SweepEntry {
            lambda,
            mean_val_nlpd: report.mean_val_nlpd(),
            report,
        });
    }
    let best = entries
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.mean_val_nlpd.total_cmp(&y.mean_val_nlpd))
        .map(|(i, _)| i)
        .ok_or_else(|| anyhow!("no lambda evaluated"))?;
    write_json(&dir.join("metrics.json"), &entries[best].report)?;
    if lambdas.len() > 1 {
        println!("selected lambda {}", entries[best].lambda);
        let sweep = Sweep {
            selected_lambda: entries[best].lambda,
            entries,
        };
        write_json(&dir.join("sweep.json"), &sweep)?;
    }
    println!("{}", dir.join("metrics.json").display());
    Ok(())
}

fn lap_bench(a: LapBenchArgs) -> Result<()> {
    use std::fmt::Write as _;
    if a.batches.iter().any(|&b| b < 2) || a.batches.is_empty() {
        return Err(invalid("batch sizes must be >= 2"));
    }
    if a.sample_sizes.iter().any(|&s| s < 1) || a.sample_sizes.is_empty() {
        return Err(invalid("sample sizes must be >= 1"));
    }
    if a.reps < 1 {
        return Err(invalid("reps must be >= 1"));
    }
    let tcfg = TransportConfig {
        lambda: a.lambda,
        k_neighbors: a.k_neighbors,
        ..TransportConfig::new(1, 1)
    };
    tcfg.validate()?;
    let mut csv = String::from("mode,batch,sample_size,build_s,solve_s\n");
    for &batch in &a.batches {
        for &ss in &a.sample_sizes {
            let mut totals = [[0.0f64; 2]; 2];
            for rep in 0..a.reps {
                let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ ((batch as u64) << 32) ^ ((ss as u64) << 16) ^ rep as u64);
                let (reals, fakes) = bench_sets(batch, ss, &mut rng)?;
                let grouping = Grouping::repeated(batch, ss);

                let t = Instant::now();
                let dense = build_dense_cost(&reals, &fakes, &tcfg)?;
                totals[0][0] += t.elapsed().as_secs_f64();
                let t = Instant::now();
                let d = lap::solve_dense(&dense);
                totals[0][1] += t.elapsed().as_secs_f64();

                let t = Instant::now();
                let sparse = build_sparse_cost(&reals, &fakes, &tcfg, &grouping)?;
                totals[1][0] += t.elapsed().as_secs_f64();
                let t = Instant::now();
                let s = lap::solve_sparse(&sparse)?;
                totals[1][1] += t.elapsed().as_secs_f64();
                if s.total_cost + 1e-9 * s.total_cost.abs().max(1.0) < d.total_cost {
                    bail!("sparse optimum below dense optimum at batch {batch}, sample size {ss}");
                }
            }
            for (mode, t) in ["dla", "sla"].iter().zip(totals) {
                let reps = a.reps as f64;
                let _ = writeln!(csv, "{mode},{batch},{ss},{},{}", t[0] / reps, t[1] / reps);
            }
            log::info!("batch {batch}, sample size {ss} done");
        }
    }
    std::fs::write(&a.out, &csv).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{csv}");
    Ok(())
}

/// Standardized sinus-like reals repeated `ss` times and fakes drawn
/// independently around the same inputs.
fn bench_sets(batch: usize, ss: usize, rng: &mut ChaCha8Rng) -> Result<(SampleSet, SampleSet)> {
    let xs: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.7..1.7)).collect();
    let noise = standard_normal((batch * ss, 2), rng);
    let mut rx = Vec::with_capacity(batch * ss);
    let mut ry = Vec::with_capacity(batch * ss);
    let mut fy = Vec::with_capacity(batch * ss);
    for (u, &x) in xs.iter().enumerate() {
        let y = (2.0 * x).sin() + 0.5 * noise[[u * ss, 0]];
        for r in 0..ss {
            rx.push(x);
            ry.push(y);
            fy.push((2.0 * x).sin() + 0.5 * noise[[u * ss + r, 1]]);
        }
    }
    Ok((SampleSet::new(1, 1, rx.clone(), ry)?, SampleSet::new(1, 1, rx, fy)?))
}
