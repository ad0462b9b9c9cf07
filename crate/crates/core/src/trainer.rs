//! Mini-batch training of the generator against the empirical OT cost.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{best_bandwidth, default_bandwidth_grid, generate_rows, DEFAULT_TRIM};
use crate::generator::{adam_step, backward, forward, AdamState, ForwardCache, GeneratorParams, NoiseSpec, Phase};
use crate::lap;
use crate::transport::{
    build_dense_cost, build_sparse_cost, plan_from_assignment, plan_gradient, Grouping, Mode, SampleSet,
    TransportConfig, TransportPlan,
};

/// Seed offset of the fixed validation draws used every epoch.
const VALIDATION_SEED_SALT: u64 = 0x76616c;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub batch_size: usize,
    /// Generated samples per real sample in a mini-batch.
    pub sample_size: usize,
    pub lambda: f64,
    pub p: f64,
    pub k_neighbors: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Generator draws per validation row for the per-epoch NLPD.
    pub val_draws: usize,
    pub noise_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Dense,
            batch_size: 100,
            sample_size: 10,
            lambda: 0.9,
            p: 1.0,
            k_neighbors: 10,
            learning_rate: 1e-3,
            patience: 10,
            max_epochs: 200,
            seed: 0,
            validation_fraction: 0.2,
            val_draws: 200,
            noise_dim: 1,
        }
    }
}

impl TrainConfig {
    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size < 2 {
            problems.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.sample_size < 1 {
            problems.push("sample_size must be >= 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            problems.push(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            problems.push(format!("p must be a finite value >= 1, got {}", self.p));
        }
        if self.k_neighbors < 1 {
            problems.push("k_neighbors must be >= 1".to_string());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.patience < 1 {
            problems.push("patience must be >= 1".to_string());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            problems.push(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.val_draws < 1 {
            problems.push("val_draws must be >= 1".to_string());
        }
        if self.noise_dim < 1 {
            problems.push("noise_dim must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn transport(&self, n: usize, m: usize) -> TransportConfig {
        TransportConfig {
            lambda: self.lambda,
            p: self.p,
            k_neighbors: self.k_neighbors,
            n,
            m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_ot_cost: f64,
    pub val_nlpd: f64,
    pub wall_s: f64,
    pub lap_s: f64,
    pub build_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const HEADER: &'static str = "epoch,train_ot_cost,val_nlpd,wall_s,lap_s,build_s";

    /// CSV text; with `timings` false the three time columns are written as
    /// zero so that repeated runs produce identical files.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.records {
            let (w, l, b) = if timings { (r.wall_s, r.lap_s, r.build_s) } else { (0.0, 0.0, 0.0) };
            let _ = writeln!(s, "{},{},{},{w},{l},{b}", r.epoch, r.train_ot_cost, r.val_nlpd);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, timings: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(timings))?;
        Ok(())
    }

    /// Record with the lowest validation NLPD (earliest on ties).
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.val_nlpd <= r.val_nlpd => Some(b),
                _ => Some(r),
            })
    }
}

/// One mini-batch: reals repeated `sample_size` times, an equal number of
/// train-mode fakes, and the cache needed to backpropagate into the fakes.
#[derive(Debug, Clone)]
pub struct Batch {
    pub reals: SampleSet,
    pub fakes: SampleSet,
    pub grouping: Grouping,
    pub cache: ForwardCache,
}

/// Builds a batch from rows `indices` of `set`, running the generator
/// forward in train mode on `sample_size` noise draws per row.
pub fn make_batch(
    set: &SampleSet,
    indices: &[usize],
    sample_size: usize,
    params: &mut GeneratorParams,
    rng: &mut ChaCha8Rng,
) -> Result<Batch> {
    if indices.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if sample_size < 1 {
        return Err(Error::Config("sample_size must be >= 1".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= set.len()) {
        return Err(Error::Dimension(format!("batch index {bad} out of range for {} rows", set.len())));
    }
    let order: Vec<usize> = indices
        .iter()
        .flat_map(|&i| std::iter::repeat(i).take(sample_size))
        .collect();
    let reals = set.select(&order);
    let n = set.x_dim();
    let x = Array2::from_shape_vec((order.len(), n), reals.x_values().to_vec()).expect("row-major shape");
    let z = NoiseSpec::new(params.k)?.sample(order.len(), rng);
    let (y, cache) = forward(params, x.view(), z.view(), Phase::Train)?;
    let fakes = SampleSet::new(n, params.m, reals.x_values().to_vec(), y.into_raw_vec_and_offset().0)?;
    Ok(Batch {
        reals,
        fakes,
        grouping: Grouping::repeated(indices.len(), sample_size),
        cache,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// OT cost of the batch before the update.
    pub ot_cost: f64,
    pub plan: TransportPlan,
    pub build_s: f64,
    pub lap_s: f64,
}

/// Solves the batch's assignment problem and returns the plan with timings.
pub fn solve_batch(batch: &Batch, tcfg: &TransportConfig, mode: Mode) -> Result<StepOutcome> {
    let t0 = Instant::now();
    let solved = match mode {
        Mode::Dense => None,
        Mode::Sparse => {
            let sparse = build_sparse_cost(&batch.reals, &batch.fakes, tcfg, &batch.grouping)?;
            let build_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            match lap::solve_sparse(&sparse) {
                Ok(a) => Some((a, build_s, t1.elapsed().as_secs_f64())),
                Err(Error::Infeasible { row }) => {
                    log::warn!("sparse assignment infeasible at row {row}; solving this batch densely");
                    None
                }
                Err(e) => return Err(e),
            }
        }
    };
    let (assignment, build_s, lap_s) = match solved {
        Some(s) => s,
        None => {
            let t0 = Instant::now();
            let dense = build_dense_cost(&batch.reals, &batch.fakes, tcfg)?;
            let build_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let a = lap::solve_dense(&dense);
            (a, build_s, t1.elapsed().as_secs_f64())
        }
    };
    let (ot_cost, plan) = plan_from_assignment(assignment.row_to_col, assignment.total_cost);
    Ok(StepOutcome {
        ot_cost,
        plan,
        build_s,
        lap_s,
    })
}

/// One training step: solve the plan, push the fixed-plan gradient through
/// the generator, and apply one Adam update.
pub fn step(params: &mut GeneratorParams, adam: &mut AdamState, batch: &Batch, cfg: &TrainConfig) -> Result<StepOutcome> {
    let tcfg = cfg.transport(batch.reals.x_dim(), batch.reals.y_dim());
    let outcome = solve_batch(batch, &tcfg, cfg.mode)?;
    if !outcome.ot_cost.is_finite() {
        return Err(Error::NonFinite(format!("batch OT cost {}", outcome.ot_cost)));
    }
    let grad_y = plan_gradient(&batch.reals, &batch.fakes, &outcome.plan, &tcfg);
    let grad_y = Array2::from_shape_vec((batch.fakes.len(), batch.fakes.y_dim()), grad_y).expect("row-major shape");
    let grads = backward(params, &batch.cache, grad_y.view())?;
    adam_step(adam, params, &grads)?;
    Ok(outcome)
}

/// Seeded split of `set` into `(train, validation)`; the validation part
/// holds `round(fraction * len)` rows, at least one.
pub fn split_validation(set: &SampleSet, fraction: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction must lie in (0, 1), got {fraction}")));
    }
    let len = set.len();
    let n_val = ((fraction * len as f64).round() as usize).max(1);
    if n_val >= len {
        return Err(Error::Config(format!("{len} rows are too few for a validation split")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ VALIDATION_SEED_SALT));
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((set.select(&train), set.select(&val)))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation NLPD (the initial parameters when
    /// no epoch ran).
    pub params: GeneratorParams,
    pub history: TrainHistory,
    /// 1-based epoch of the snapshot, 0 for the initial parameters.
    pub best_epoch: usize,
}

/// Trains on `train`, early-stopping on the trimmed NLPD of `val`.
pub fn fit(train: &SampleSet, val: &SampleSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "{} training rows are fewer than batch_size {}",
            train.len(),
            cfg.batch_size
        )));
    }
    if val.is_empty() {
        return Err(Error::Config("empty validation set".into()));
    }
    if val.x_dim() != train.x_dim() || val.y_dim() != train.y_dim() {
        return Err(Error::Dimension("training and validation sets differ in dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = GeneratorParams::init(train.x_dim(), train.y_dim(), cfg.noise_dim, &mut rng)?;
    let mut adam = AdamState::new(&params, cfg.learning_rate);
    let grid = default_bandwidth_grid();
    let val_seed = cfg.seed ^ VALIDATION_SEED_SALT;

    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let (mut cost_sum, mut lap_s, mut build_s) = (0.0, 0.0, 0.0);
        let batches = order.chunks_exact(cfg.batch_size);
        let count = batches.len();
        for (b, idx) in batches.enumerate() {
            let batch = make_batch(train, idx, cfg.sample_size, &mut params, &mut rng)?;
            let out = step(&mut params, &mut adam, &batch, cfg).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch}, batch {b}: {msg}")),
                other => other,
            })?;
            cost_sum += out.ot_cost;
            lap_s += out.lap_s;
            build_s += out.build_s;
        }
        let train_ot_cost = cost_sum / count as f64;
        let samples = generate_rows(&params, val, cfg.val_draws, val_seed)?;
        let (_, val_nlpd) = best_bandwidth(&samples, val, &grid, DEFAULT_TRIM)?;
        let record = EpochRecord {
            epoch,
            train_ot_cost,
            val_nlpd,
            wall_s: start.elapsed().as_secs_f64(),
            lap_s,
            build_s,
        };
        log::debug!(
            "epoch {epoch}: ot cost {train_ot_cost:.5}, validation nlpd {val_nlpd:.5}, {:.3}s",
            record.wall_s
        );
        history.records.push(record);
        if val_nlpd < best.0 {
            best = (val_nlpd, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        history,
        best_epoch: best.2,
    })
}

/// Splits off a validation set and trains on the remainder.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<(TrainOutcome, SampleSet)> {
    cfg.validate()?;
    let (fit_set, val_set) = split_validation(&data.samples, cfg.validation_fraction, cfg.seed)?;
    Ok((fit(&fit_set, &val_set, cfg)?, val_set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_sinus;
    use crate::transport::{ot_cost_and_plan, plan_cost};
    use rand::Rng;

    fn toy(rows: usize, seed: u64, f: impl Fn(f64) -> f64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = x.iter().map(|&v| f(v)).collect();
        SampleSet::new(1, 1, x, y).unwrap()
    }

    #[test]
    fn batch_layout() {
        let set = toy(10, 1, |x| 2.0 * x);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = GeneratorParams::init(1, 1, 1, &mut rng).unwrap();
        let b = make_batch(&set, &[4, 7], 3, &mut params, &mut rng).unwrap();
        assert_eq!(b.reals.len(), 6);
        assert_eq!(b.fakes.len(), 6);
        for r in 0..6 {
            let src = [4, 7][r / 3];
            assert_eq!(b.reals.x_row(r), set.x_row(src));
            assert_eq!(b.reals.y_row(r), set.y_row(src));
            assert_eq!(b.fakes.x_row(r), set.x_row(src));
        }
        assert_eq!(b.grouping.fake_parent, vec![0, 0, 0, 1, 1, 1]);

        let one = make_batch(&set, &[0, 1, 2], 1, &mut params, &mut rng).unwrap();
        assert_eq!(one.reals, set.select(&[0, 1, 2]));
        assert!(make_batch(&set, &[], 1, &mut params, &mut rng).is_err());
        assert!(make_batch(&set, &[10], 1, &mut params, &mut rng).is_err());
    }

    #[test]
    fn batch_is_seeded() {
        let set = toy(10, 1, |x| x);
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut params = GeneratorParams::init(1, 1, 1, &mut rng).unwrap();
            make_batch(&set, &[1, 2, 3], 4, &mut params, &mut rng).unwrap().fakes
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn exact_fakes_leave_params_unchanged() {
        let mut params = GeneratorParams::zeros(1, 1, 1).unwrap();
        params.out.bias[0] = 0.25;
        let set = toy(6, 3, |_| 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let before = params.flat_trainable();
        let mut adam = AdamState::new(&params, 1e-3);
        let batch = make_batch(&set, &[0, 1, 2, 3], 2, &mut params, &mut rng).unwrap();
        let cfg = TrainConfig::default();
        let out = step(&mut params, &mut adam, &batch, &cfg).unwrap();
        assert_eq!(out.ot_cost, 0.0);
        assert_eq!(params.flat_trainable(), before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn step_moves_fakes_toward_reals() {
        // fakes sit at the bias 1.0, reals at 0: the gradient in each fake is
        // (1 - lambda) / N and the update lowers the output
        let mut params = GeneratorParams::zeros(1, 1, 1).unwrap();
        params.out.bias[0] = 1.0;
        let set = SampleSet::new(1, 1, vec![0.0, 0.5], vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut adam = AdamState::new(&params, 1e-3);
        let batch = make_batch(&set, &[0, 1], 1, &mut params, &mut rng).unwrap();
        let cfg = TrainConfig::default();
        let tcfg = cfg.transport(1, 1);
        let (_, plan) = ot_cost_and_plan(&batch.reals, &batch.fakes, &tcfg, Mode::Dense, None).unwrap();
        let g = plan_gradient(&batch.reals, &batch.fakes, &plan, &tcfg);
        for v in &g {
            assert!((v - 0.1 / 2.0).abs() < 1e-15);
        }
        let out = step(&mut params, &mut adam, &batch, &cfg).unwrap();
        assert!((out.ot_cost - 0.1).abs() < 1e-12);
        assert!(params.out.bias[0] < 1.0);
    }

    #[test]
    fn sparse_with_all_neighbours_matches_dense() {
        let set = toy(40, 6, |x| x * x);
        let idx: Vec<usize> = (0..12).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = GeneratorParams::init(1, 1, 1, &mut rng).unwrap();
        let batch = make_batch(&set, &idx, 3, &mut params, &mut rng).unwrap();
        let cfg = TrainConfig {
            k_neighbors: 12,
            ..TrainConfig::default()
        };
        let tcfg = cfg.transport(1, 1);
        let dense = solve_batch(&batch, &tcfg, Mode::Dense).unwrap();
        let sparse = solve_batch(&batch, &tcfg, Mode::Sparse).unwrap();
        assert!((dense.ot_cost - sparse.ot_cost).abs() < 1e-12);
    }

    #[test]
    fn update_is_a_descent_direction() {
        let set = toy(30, 10, |x| x.sin());
        let cfg = TrainConfig {
            p: 1.0,
            ..TrainConfig::default()
        };
        let tcfg = cfg.transport(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut params = GeneratorParams::init(1, 1, 1, &mut rng).unwrap();
        let idx: Vec<usize> = (0..10).collect();
        let batch_rng = rng.clone();
        let batch = make_batch(&set, &idx, 2, &mut params.clone(), &mut batch_rng.clone()).unwrap();
        let plan = solve_batch(&batch, &tcfg, Mode::Dense).unwrap().plan;

        // loss along theta + t * (theta_new - theta) with the plan fixed
        let base = params.clone();
        let loss_at = |theta: &[f64]| {
            let mut q = base.clone();
            q.set_flat_trainable(theta).unwrap();
            let b = make_batch(&set, &idx, 2, &mut q, &mut batch_rng.clone()).unwrap();
            plan_cost(&b.reals, &b.fakes, &plan, &tcfg)
        };
        let theta0 = params.flat_trainable();
        let mut adam = AdamState::new(&params, 1e-3);
        let b = make_batch(&set, &idx, 2, &mut params, &mut batch_rng.clone()).unwrap();
        step(&mut params, &mut adam, &b, &cfg).unwrap();
        let theta1 = params.flat_trainable();
        let h = 1e-3;
        let moved: Vec<f64> = theta0.iter().zip(&theta1).map(|(a, b)| a + h * (b - a)).collect();
        let directional = (loss_at(&moved) - loss_at(&theta0)) / h;
        assert!(directional <= 0.0, "directional derivative {directional}");
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let set = toy(30, 1, |x| x);
        let (train, val) = split_validation(&set, 0.2, 1).unwrap();
        let cfg = TrainConfig {
            max_epochs: 0,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let out = fit(&train, &val, &cfg).unwrap();
        assert!(out.history.records.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(out.params, GeneratorParams::init(1, 1, 1, &mut rng).unwrap());
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn split_validation_partitions() {
        let set = toy(50, 2, |x| x);
        let (t, v) = split_validation(&set, 0.2, 7).unwrap();
        assert_eq!((t.len(), v.len()), (40, 10));
        let mut xs: Vec<f64> = t.x_values().iter().chain(v.x_values()).copied().collect();
        let mut orig = set.x_values().to_vec();
        xs.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(xs, orig);
        assert!(split_validation(&toy(1, 1, |x| x), 0.5, 1).is_err());
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let cfg = TrainConfig {
            lambda: 1.5,
            batch_size: 1,
            patience: 0,
            ..TrainConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("lambda") && msg.contains("batch_size") && msg.contains("patience"), "{msg}");
    }

    #[test]
    fn constant_target_cost_drops() {
        let set = toy(200, 4, |_| 0.0);
        let (train, val) = split_validation(&set, 0.2, 4).unwrap();
        let cfg = TrainConfig {
            batch_size: 32,
            sample_size: 4,
            max_epochs: 50,
            patience: 50,
            val_draws: 20,
            seed: 4,
            ..TrainConfig::default()
        };
        let out = fit(&train, &val, &cfg).unwrap();
        let costs: Vec<f64> = out.history.records.iter().map(|r| r.train_ot_cost).collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min < 0.05, "costs {costs:?}");
    }

    #[test]
    fn training_is_deterministic_and_keeps_best() {
        let data = gen_sinus(300, 5).unwrap();
        let (data, _) = crate::data::standardize(&data).unwrap();
        let cfg = TrainConfig {
            batch_size: 40,
            sample_size: 4,
            max_epochs: 8,
            patience: 3,
            val_draws: 30,
            seed: 11,
            mode: Mode::Sparse,
            ..TrainConfig::default()
        };
        let (a, _) = train(&data, &cfg).unwrap();
        let (b, _) = train(&data, &cfg).unwrap();
        assert_eq!(a.history.to_csv(false), b.history.to_csv(false));
        assert_eq!(a.params, b.params);
        let best = a.history.best().unwrap();
        assert_eq!(best.epoch, a.best_epoch);
        assert!(a.history.records.iter().all(|r| r.val_nlpd >= best.val_nlpd));
        for r in &a.history.records {
            assert!(r.lap_s >= 0.0 && r.build_s >= 0.0);
            assert!(r.lap_s + r.build_s <= r.wall_s);
        }
        assert!(a.history.records.windows(2).all(|w| w[1].epoch == w[0].epoch + 1));
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            records: vec![EpochRecord {
                epoch: 1,
                train_ot_cost: 0.5,
                val_nlpd: 1.25,
                wall_s: 0.3,
                lap_s: 0.1,
                build_s: 0.05,
            }],
        };
        assert_eq!(h.to_csv(true), "epoch,train_ot_cost,val_nlpd,wall_s,lap_s,build_s\n1,0.5,1.25,0.3,0.1,0.05\n");
        assert_eq!(h.to_csv(false), "epoch,train_ot_cost,val_nlpd,wall_s,lap_s,build_s\n1,0.5,1.25,0,0,0\n");
    }
}
