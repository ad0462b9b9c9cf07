//! Synthetic datasets, CSV ingestion, standardization, and k-fold splits.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transport::SampleSet;

/// Default row count of the one-dimensional synthetic datasets.
pub const DEFAULT_ROWS: usize = 5000;
/// Mixture-density dataset: row count, component count, component mean box
/// and std range, and noise level relative to the density's spread.
pub const MIXTURE_ROWS: usize = 5000;
pub const MIXTURE_COMPONENTS: usize = 200;
pub const MIXTURE_MEAN_BOX: (f64, f64) = (0.0, 1.0);
pub const MIXTURE_STD_RANGE: (f64, f64) = (0.01, 0.1);
pub const MIXTURE_NOISE_FRACTION: f64 = 0.01;

/// Per-column statistics used to map between raw and standardized values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

impl Standardization {
    /// Applies these statistics to another dataset with the same columns.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.x_dim() != self.x_mean.len() || data.y_dim() != self.y_mean.len() {
            return Err(Error::Dimension(format!(
                "statistics cover ({}, {}) columns, dataset has ({}, {})",
                self.x_mean.len(),
                self.y_mean.len(),
                data.x_dim(),
                data.y_dim()
            )));
        }
        let x = scale(data.samples.x_values(), &self.x_mean, &self.x_std);
        let y = scale(data.samples.y_values(), &self.y_mean, &self.y_std);
        let mut out = data.clone();
        out.samples = SampleSet::new(data.x_dim(), data.y_dim(), x, y)?;
        out.stats = Some(self.clone());
        Ok(out)
    }

    /// Maps standardized targets (row-major, `m` columns) back to raw units.
    pub fn inverse_y(&self, y: &[f64]) -> Vec<f64> {
        let m = self.y_mean.len();
        y.iter()
            .enumerate()
            .map(|(i, v)| v * self.y_std[i % m] + self.y_mean[i % m])
            .collect()
    }

    pub fn inverse_x(&self, x: &[f64]) -> Vec<f64> {
        let n = self.x_mean.len();
        x.iter()
            .enumerate()
            .map(|(i, v)| v * self.x_std[i % n] + self.x_mean[i % n])
            .collect()
    }

    /// Standardizes a single input row.
    pub fn forward_x(&self, x: &[f64]) -> Vec<f64> {
        scale(x, &self.x_mean, &self.x_std)
    }
}

fn scale(values: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    let d = mean.len();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - mean[i % d]) / std[i % d])
        .collect()
}

/// Regression data: inputs `x` (n columns), targets `y` (m columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub samples: SampleSet,
    /// Set once the dataset has been standardized.
    pub stats: Option<Standardization>,
}

impl Dataset {
    /// Builds a dataset with default column names `x_i` / `y_j`.
    pub fn new(name: impl Into<String>, n: usize, m: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let samples = SampleSet::new(n, m, x, y)?;
        Ok(Self {
            name: name.into(),
            x_names: (0..n).map(|i| format!("x_{i}")).collect(),
            y_names: (0..m).map(|j| format!("y_{j}")).collect(),
            samples,
            stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.samples.x_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.samples.y_dim()
    }

    /// Rows `indices`, in that order, keeping names and statistics.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
            samples: self.samples.select(indices),
            stats: self.stats.clone(),
        }
    }
}

/// The built-in synthetic datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sinus,
    Exp,
    Heteroscedastic,
    Multimodal,
    Mixture,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::Sinus,
        Builtin::Exp,
        Builtin::Heteroscedastic,
        Builtin::Multimodal,
        Builtin::Mixture,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Builtin::Sinus => "sinus",
            Builtin::Exp => "exp",
            Builtin::Heteroscedastic => "heteroscedastic",
            Builtin::Multimodal => "multimodal",
            Builtin::Mixture => "mixture",
        }
    }

    /// Generates the dataset; `rows` is ignored by the fixed-size mixture.
    pub fn generate(&self, rows: usize, seed: u64) -> Result<Dataset> {
        match self {
            Builtin::Sinus => gen_sinus(rows, seed),
            Builtin::Exp => gen_exp(rows, seed),
            Builtin::Heteroscedastic => gen_heteroscedastic(rows, seed),
            Builtin::Multimodal => gen_multimodal(rows, seed),
            Builtin::Mixture => gen_mixture_density(seed),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinus" => Ok(Builtin::Sinus),
            "exp" => Ok(Builtin::Exp),
            "heteroscedastic" | "hetero" => Ok(Builtin::Heteroscedastic),
            "multimodal" | "multi-modal" => Ok(Builtin::Multimodal),
            "mixture" => Ok(Builtin::Mixture),
            other => Err(Error::Config(format!(
                "unknown dataset {other:?}; expected one of sinus, exp, heteroscedastic, multimodal, mixture"
            ))),
        }
    }
}

fn check_rows(rows: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::Config("row count must be >= 1".into()));
    }
    Ok(())
}

fn one_dim(name: &str, rows: usize, seed: u64, mut draw: impl FnMut(&mut ChaCha8Rng) -> (f64, f64)) -> Result<Dataset> {
    check_rows(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, y) = (0..rows).map(|_| draw(&mut rng)).unzip();
    Dataset::new(name, 1, 1, x, y)
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `y = sin(x) + z`, `x ~ U[-4, 4]`, `z ~ N(0, 1)`.
pub fn gen_sinus(rows: usize, seed: u64) -> Result<Dataset> {
    one_dim("sinus", rows, seed, |rng| {
        let x = rng.gen_range(-4.0..=4.0);
        (x, x.sin() + normal(rng))
    })
}

/// `y = x + exp(z)`, `x, z ~ N(0, 1)`.
pub fn gen_exp(rows: usize, seed: u64) -> Result<Dataset> {
    one_dim("exp", rows, seed, |rng| {
        let x = normal(rng);
        (x, x + normal(rng).exp())
    })
}

/// `y = x + (0.001 + 0.5|x|) z`, `x ~ N(0, 1)`, `z ~ N(1, 1)`.
pub fn gen_heteroscedastic(rows: usize, seed: u64) -> Result<Dataset> {
    one_dim("heteroscedastic", rows, seed, |rng| {
        let x = normal(rng);
        let z = 1.0 + normal(rng);
        (x, x + hetero_scale(x) * z)
    })
}

pub fn hetero_scale(x: f64) -> f64 {
    0.001 + 0.5 * x.abs()
}

/// Piecewise regimes over `x ~ U[0, 1]`: below 0.4 the lines `1.2x` and
/// `x + 0.6` (noise 0.03); on `[0.4, 0.6)` the lines `0.5x` and `0.6x`
/// (noise 0.01); from 0.6 the constant 0.5 (noise 0.02). Two-branch regimes
/// pick a branch with probability 1/2.
pub fn gen_multimodal(rows: usize, seed: u64) -> Result<Dataset> {
    one_dim("multimodal", rows, seed, |rng| {
        let x: f64 = rng.gen_range(0.0..1.0);
        let branch: bool = rng.gen();
        let z = normal(rng);
        (x, multimodal_line(x, branch) + multimodal_noise(x) * z)
    })
}

/// Centre of the selected branch at `x`.
pub fn multimodal_line(x: f64, branch: bool) -> f64 {
    if x < 0.4 {
        if branch {
            1.2 * x
        } else {
            x + 0.6
        }
    } else if x < 0.6 {
        if branch {
            0.5 * x
        } else {
            0.6 * x
        }
    } else {
        0.5
    }
}

pub fn multimodal_noise(x: f64) -> f64 {
    if x < 0.4 {
        0.03
    } else if x < 0.6 {
        0.01
    } else {
        0.02
    }
}

/// Two-dimensional inputs drawn from a random Gaussian mixture; the target
/// is the mixture density at `x` plus small Gaussian noise.
pub fn gen_mixture_density(seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = MIXTURE_MEAN_BOX;
    let (slo, shi) = MIXTURE_STD_RANGE;
    let components: Vec<([f64; 2], f64)> = (0..MIXTURE_COMPONENTS)
        .map(|_| {
            let mean = [rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
            (mean, rng.gen_range(slo..shi))
        })
        .collect();
    let mut x = Vec::with_capacity(2 * MIXTURE_ROWS);
    for _ in 0..MIXTURE_ROWS {
        let (mean, std) = components[rng.gen_range(0..MIXTURE_COMPONENTS)];
        x.push(mean[0] + std * normal(&mut rng));
        x.push(mean[1] + std * normal(&mut rng));
    }
    let density: Vec<f64> = x.chunks(2).map(|p| mixture_density(&components, p)).collect();
    let mean = density.iter().sum::<f64>() / density.len() as f64;
    let spread = (density.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / density.len() as f64).sqrt();
    let noise = MIXTURE_NOISE_FRACTION * spread;
    let y = density.iter().map(|d| d + noise * normal(&mut rng)).collect();
    Dataset::new("mixture", 2, 1, x, y)
}

fn mixture_density(components: &[([f64; 2], f64)], p: &[f64]) -> f64 {
    let w = 1.0 / components.len() as f64;
    components
        .iter()
        .map(|(mu, s)| {
            let d2 = (p[0] - mu[0]).powi(2) + (p[1] - mu[1]).powi(2);
            w * (-0.5 * d2 / (s * s)).exp() / (2.0 * std::f64::consts::PI * s * s)
        })
        .sum()
}

/// Which columns of a CSV are targets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TargetColumns {
    /// Every column whose name starts with `y_`.
    #[default]
    Prefixed,
    /// These named columns.
    Named(Vec<String>),
}

/// Reads a header-first, comma-separated file of numbers.
pub fn load_csv(path: impl AsRef<Path>, targets: &TargetColumns) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let is_target: Vec<bool> = match targets {
        TargetColumns::Prefixed => header.iter().map(|h| h.starts_with("y_")).collect(),
        TargetColumns::Named(names) => {
            if let Some(missing) = names.iter().find(|n| !header.contains(n)) {
                return Err(Error::Data(format!("{}: no column named {missing:?}", path.display())));
            }
            header.iter().map(|h| names.contains(h)).collect()
        }
    };
    let m = is_target.iter().filter(|&&t| t).count();
    let n = header.len() - m;
    if m == 0 {
        return Err(Error::Data(format!("{}: no target columns", path.display())));
    }
    if n == 0 {
        return Err(Error::Data(format!("{}: no feature columns", path.display())));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "{}: row {} (line {line}) has {} fields, header has {}",
                path.display(),
                row + 1,
                record.len(),
                header.len()
            )));
        }
        for (col, (cell, &target)) in record.iter().zip(&is_target).enumerate() {
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::Data(format!(
                    "{}: row {} (line {line}), column {:?}: {cell:?} is not a finite number",
                    path.display(),
                    row + 1,
                    header[col]
                ))
            })?;
            if target {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if x.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    let samples = SampleSet::new(n, m, x, y)?;
    let split = |want: bool| {
        header
            .iter()
            .zip(&is_target)
            .filter(|(_, &t)| t == want)
            .map(|(h, _)| h.clone())
            .collect()
    };
    Ok(Dataset {
        name,
        x_names: split(false),
        y_names: split(true),
        samples,
        stats: None,
    })
}

/// Writes feature columns then target columns; values round-trip exactly.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv_string(data))?;
    Ok(())
}

pub fn to_csv_string(data: &Dataset) -> String {
    let mut s = String::new();
    let header: Vec<&str> = data.x_names.iter().chain(&data.y_names).map(String::as_str).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for i in 0..data.len() {
        let mut first = true;
        for v in data.samples.x_row(i).iter().chain(data.samples.y_row(i)) {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

fn column_stats(values: &[f64], width: usize, names: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = values.len() / width;
    let mut mean = vec![0.0; width];
    for row in values.chunks(width) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; width];
    for row in values.chunks(width) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / rows as f64).sqrt()).collect();
    for (j, (s, m)) in std.iter().zip(&mean).enumerate() {
        if !(*s > 1e-12 * m.abs().max(1.0)) {
            return Err(Error::Data(format!("column {:?} is constant", names[j])));
        }
    }
    Ok((mean, std))
}

/// Centres every column and scales it to unit population variance.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardization)> {
    let (x_mean, x_std) = column_stats(data.samples.x_values(), data.x_dim(), &data.x_names)?;
    let (y_mean, y_std) = column_stats(data.samples.y_values(), data.y_dim(), &data.y_names)?;
    let stats = Standardization {
        x_mean,
        x_std,
        y_mean,
        y_std,
    };
    Ok((stats.apply(data)?, stats))
}

/// Maps standardized targets back to raw units.
pub fn inverse_transform(y: &[f64], stats: &Standardization) -> Vec<f64> {
    stats.inverse_y(y)
}

/// Disjoint test folds covering every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Every row outside fold `f`, in ascending order.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Seeded shuffle followed by a contiguous partition into `k` folds whose
/// sizes differ by at most one.
pub fn kfold(rows: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be >= 2, got {k}")));
    }
    if rows < k {
        return Err(Error::Config(format!("{rows} rows cannot form {k} folds")));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (rows / k, rows % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldSplit { folds })
}
