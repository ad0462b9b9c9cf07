//! Parzen-window NLPD, trimmed point metrics, and cross-validation.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{kfold, Dataset};
use crate::error::{Error, Result};
use crate::generator::{standard_normal, GeneratorParams};
use crate::par;
use crate::trainer::{fit, split_validation, TrainConfig};
use crate::transport::SampleSet;

pub const DEFAULT_DRAWS: usize = 2000;
pub const DEFAULT_TRIM: (f64, f64) = (0.25, 0.75);

/// 13 log-spaced bandwidths from 0.01 to 1.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-2.0 + i as f64 / 6.0)).collect()
}

/// Isotropic Gaussian kernel density estimate over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenEstimator {
    samples: Vec<f64>,
    dim: usize,
    bandwidth: f64,
}

impl ParzenEstimator {
    /// `samples` is row-major with `dim` columns.
    pub fn new(samples: Vec<f64>, dim: usize, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if dim == 0 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} sample values do not form rows of dimension {dim}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            dim,
            bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::Dimension(format!("query has {} values, samples have {}", y.len(), self.dim)));
        }
        Ok(log_density_unchecked(&self.samples, self.dim, self.bandwidth, y))
    }
}

/// `log((1/S) sum_s N(y; sample_s, sigma^2 I))`, stabilized with log-sum-exp.
pub fn parzen_log_density(est: &ParzenEstimator, y: &[f64]) -> Result<f64> {
    est.log_density(y)
}

fn log_density_unchecked(samples: &[f64], dim: usize, sigma: f64, y: &[f64]) -> f64 {
    let inv = -0.5 / (sigma * sigma);
    let mut max = f64::NEG_INFINITY;
    let exps: Vec<f64> = samples
        .chunks_exact(dim)
        .map(|s| {
            let d2: f64 = s.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let e = d2 * inv;
            max = max.max(e);
            e
        })
        .collect();
    let sum: f64 = exps.iter().map(|e| (e - max).exp()).sum();
    let count = exps.len() as f64;
    max + sum.ln() - count.ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

/// Mean of the values whose zero-based sorted rank `r` satisfies
/// `ceil(lo * T) <= r < floor(hi * T)`. When that window is empty the median
/// is returned.
pub fn trimmed_mean(values: &[f64], trim: (f64, f64)) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data("trimmed mean of no values".into()));
    }
    if !(0.0..=1.0).contains(&trim.0) || !(0.0..=1.0).contains(&trim.1) || trim.0 >= trim.1 {
        return Err(Error::Config(format!("invalid trim window {trim:?}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len() as f64;
    let lo = (trim.0 * t).ceil() as usize;
    let hi = ((trim.1 * t).floor() as usize).min(sorted.len());
    if lo >= hi {
        return Ok(median_sorted(&sorted));
    }
    Ok(sorted[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Deterministic generator for row `row` of an evaluation with `seed`.
pub fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `draws` eval-mode samples at row `i`'s input, row-major `draws x m`.
fn draw_row(params: &GeneratorParams, x: &[f64], draws: usize, seed: u64, row: usize) -> Result<Vec<f64>> {
    let mut rng = row_rng(seed, row);
    let xs = Array2::from_shape_fn((draws, params.n), |(_, j)| x[j]);
    let zs = standard_normal((draws, params.k), &mut rng);
    Ok(params.forward_eval(xs.view(), zs.view())?.into_raw_vec_and_offset().0)
}

/// Generated samples for every row of `set`.
pub fn generate_rows(params: &GeneratorParams, set: &SampleSet, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_eval(params, set, draws)?;
    par::map_indices(set.len(), 1, |i| draw_row(params, set.x_row(i), draws, seed, i))
        .into_iter()
        .collect()
}

fn check_eval(params: &GeneratorParams, set: &SampleSet, draws: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    if draws < 1 {
        return Err(Error::Config("draws must be >= 1".into()));
    }
    if set.x_dim() != params.n || set.y_dim() != params.m {
        return Err(Error::Dimension(format!(
            "evaluation set is ({}, {}), generator maps {} -> {}",
            set.x_dim(),
            set.y_dim(),
            params.n,
            params.m
        )));
    }
    Ok(())
}

/// Per-row negative log density of each target under each bandwidth;
/// result is indexed `[bandwidth][row]`.
pub fn row_nlpds(samples: &[Vec<f64>], set: &SampleSet, bandwidths: &[f64]) -> Vec<Vec<f64>> {
    let m = set.y_dim();
    let per_row = par::map_indices(samples.len(), 1, |i| {
        bandwidths
            .iter()
            .map(|&s| -log_density_unchecked(&samples[i], m, s, set.y_row(i)))
            .collect::<Vec<_>>()
    });
    (0..bandwidths.len())
        .map(|b| per_row.iter().map(|r| r[b]).collect())
        .collect()
}

/// Per-row absolute error of the sample median and squared error of the
/// sample mean, each averaged over output dimensions.
pub fn row_point_errors(samples: &[Vec<f64>], set: &SampleSet) -> (Vec<f64>, Vec<f64>) {
    let m = set.y_dim();
    let rows = par::map_indices(samples.len(), 1, |i| {
        let y = set.y_row(i);
        let mut abs = 0.0;
        let mut sq = 0.0;
        for j in 0..m {
            let mut col: Vec<f64> = samples[i].iter().skip(j).step_by(m).copied().collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            abs += (median_sorted(&col) - y[j]).abs();
            sq += (mean - y[j]).powi(2);
        }
        (abs / m as f64, sq / m as f64)
    });
    rows.into_iter().unzip()
}

/// Picks the grid bandwidth with the lowest trimmed NLPD on `val`; ties go
/// to the smaller bandwidth.
pub fn select_bandwidth(
    params: &GeneratorParams,
    val: &SampleSet,
    grid: &[f64],
    draws: usize,
    trim: (f64, f64),
    seed: u64,
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    let samples = generate_rows(params, val, draws, seed)?;
    best_bandwidth(&samples, val, grid, trim)
}

/// `(bandwidth, trimmed NLPD)` minimizing over `grid` for fixed samples.
pub fn best_bandwidth(samples: &[Vec<f64>], set: &SampleSet, grid: &[f64], trim: (f64, f64)) -> Result<(f64, f64)> {
    let mut sorted = grid.to_vec();
    if sorted.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config("bandwidths must be positive".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let per = row_nlpds(samples, set, &sorted);
    let mut best = (sorted[0], f64::INFINITY);
    for (s, values) in sorted.iter().zip(&per) {
        let score = trimmed_mean(values, trim)?;
        if score < best.1 {
            best = (*s, score);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonFinite("validation NLPD".into()));
    }
    Ok(best)
}

/// Trimmed metrics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub nlpd: f64,
    pub mae: f64,
    pub mse: f64,
}

/// Trimmed NLPD, MAE, and MSE from a single set of generated samples.
pub fn evaluate(
    params: &GeneratorParams,
    test: &SampleSet,
    bandwidth: f64,
    draws: usize,
    trim: (f64, f64),
    seed: u64,
) -> Result<Metrics> {
    ParzenEstimator::new(vec![0.0], 1, bandwidth)?;
    let samples = generate_rows(params, test, draws, seed)?;
    let nlpds = row_nlpds(&samples, test, &[bandwidth]).remove(0);
    let (abs, sq) = row_point_errors(&samples, test);
    Ok(Metrics {
        nlpd: trimmed_mean(&nlpds, trim)?,
        mae: trimmed_mean(&abs, trim)?,
        mse: trimmed_mean(&sq, trim)?,
    })
}

/// Trimmed NLPD over `test`.
pub fn nlpd(
    params: &GeneratorParams,
    test: &SampleSet,
    bandwidth: f64,
    draws: usize,
    trim: (f64, f64),
    seed: u64,
) -> Result<f64> {
    Ok(evaluate(params, test, bandwidth, draws, trim, seed)?.nlpd)
}

/// Trimmed `(MAE, MSE)` over `test`.
pub fn point_metrics(
    params: &GeneratorParams,
    test: &SampleSet,
    draws: usize,
    trim: (f64, f64),
    seed: u64,
) -> Result<(f64, f64)> {
    check_eval(params, test, draws)?;
    let samples = generate_rows(params, test, draws, seed)?;
    let (abs, sq) = row_point_errors(&samples, test);
    Ok((trimmed_mean(&abs, trim)?, trimmed_mean(&sq, trim)?))
}

/// Evaluation settings shared by `eval` and `cv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub draws: usize,
    pub trim: (f64, f64),
    pub bandwidth_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            draws: DEFAULT_DRAWS,
            trim: DEFAULT_TRIM,
            bandwidth_grid: default_bandwidth_grid(),
            folds: 5,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.draws < 1 {
            problems.push("draws must be >= 1".to_string());
        }
        let (lo, hi) = self.trim;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            problems.push(format!("trim must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"));
        }
        if self.bandwidth_grid.is_empty() || self.bandwidth_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            problems.push("bandwidth grid must be non-empty and positive".to_string());
        }
        if self.folds < 2 {
            problems.push(format!("folds must be >= 2, got {}", self.folds));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub nlpd: f64,
    pub mae: f64,
    pub mse: f64,
    pub bandwidth: f64,
    /// Trimmed NLPD on the training-side validation split at the selected
    /// bandwidth.
    pub val_nlpd: f64,
    pub epochs: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub mode: String,
    pub lambda: f64,
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
    pub std: Metrics,
    pub trim: [f64; 2],
    pub draws: usize,
}

impl MetricsReport {
    /// Mean over folds of the validation NLPD.
    pub fn mean_val_nlpd(&self) -> f64 {
        self.folds.iter().map(|f| f.val_nlpd).sum::<f64>() / self.folds.len() as f64
    }

    /// Aggregates per-fold results; `std` is the sample standard deviation
    /// across folds (zero for a single fold).
    pub fn from_folds(dataset: &str, mode: &str, lambda: f64, folds: Vec<FoldReport>, trim: (f64, f64), draws: usize) -> Self {
        let stat = |f: fn(&FoldReport) -> f64| {
            let v: Vec<f64> = folds.iter().map(f).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (mean, std)
        };
        let (nlpd, nlpd_s) = stat(|f| f.nlpd);
        let (mae, mae_s) = stat(|f| f.mae);
        let (mse, mse_s) = stat(|f| f.mse);
        Self {
            dataset: dataset.to_string(),
            mode: mode.to_string(),
            lambda,
            folds,
            mean: Metrics { nlpd, mae, mse },
            std: Metrics {
                nlpd: nlpd_s,
                mae: mae_s,
                mse: mse_s,
            },
            trim: [trim.0, trim.1],
            draws,
        }
    }
}

/// Trains on each fold's complement (with its own validation split), picks
/// the bandwidth on that validation split, and evaluates on the fold.
pub fn cross_validate(data: &Dataset, train_cfg: &TrainConfig, eval_cfg: &EvalConfig) -> Result<MetricsReport> {
    train_cfg.validate()?;
    eval_cfg.validate()?;
    let split = kfold(data.len(), eval_cfg.folds, eval_cfg.seed)?;
    let mut folds = Vec::with_capacity(split.len());
    for (f, test_idx) in split.folds.iter().enumerate() {
        let train_set = data.samples.select(&split.train_indices(f));
        let test_set = data.samples.select(test_idx);
        let fold_cfg = TrainConfig {
            seed: train_cfg.seed.wrapping_add(f as u64),
            ..train_cfg.clone()
        };
        let (fit_set, val_set) = split_validation(&train_set, fold_cfg.validation_fraction, fold_cfg.seed)?;
        let outcome = fit(&fit_set, &val_set, &fold_cfg)?;
        let eval_seed = eval_cfg.seed.wrapping_add(1000 + f as u64);
        let (bandwidth, val_nlpd) = select_bandwidth(
            &outcome.params,
            &val_set,
            &eval_cfg.bandwidth_grid,
            eval_cfg.draws,
            eval_cfg.trim,
            eval_seed,
        )?;
        let m = evaluate(&outcome.params, &test_set, bandwidth, eval_cfg.draws, eval_cfg.trim, eval_seed ^ 0x5eed)?;
        log::info!(
            "fold {}/{}: nlpd {:.4} mae {:.4} mse {:.4} (bandwidth {bandwidth:.4}, {} epochs)",
            f + 1,
            split.len(),
            m.nlpd,
            m.mae,
            m.mse,
            outcome.history.records.len()
        );
        folds.push(FoldReport {
            nlpd: m.nlpd,
            mae: m.mae,
            mse: m.mse,
            bandwidth,
            val_nlpd,
            epochs: outcome.history.records.len(),
            test_rows: test_set.len(),
        });
    }
    Ok(MetricsReport::from_folds(
        &data.name,
        train_cfg.mode.as_str(),
        train_cfg.lambda,
        folds,
        eval_cfg.trim,
        eval_cfg.draws,
    ))
}
