//! The stochastic regression network `y = f(x, z)`.
//!
//! `x` and `z` each pass through two hidden blocks (affine, ReLU, batch
//! norm); the two 16-wide representations are concatenated and pass through
//! one more hidden block and a final linear layer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Width of every hidden layer.
pub const HIDDEN: usize = 16;
/// Batch-norm variance floor.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the previous running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;

const CHECKPOINT_MAGIC: &str = "otreg-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Normalize with batch statistics and update the running ones.
    Train,
    /// Normalize with the running statistics.
    Eval,
}

/// Affine map `input . weight + bias`, weight stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn he_normal(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            }),
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, input: &ArrayView2<f64>) -> Array2<f64> {
        input.dot(&self.weight) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

/// Affine layer, ReLU, then batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dense: Dense,
    pub norm: BatchNorm,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl Block {
    fn new(dense: Dense) -> Self {
        let width = dense.bias.len();
        Self {
            dense,
            norm: BatchNorm::new(width),
        }
    }

    fn forward_eval(&self, input: &ArrayView2<f64>) -> Array2<f64> {
        let mut h = self.dense.apply(input);
        h.mapv_inplace(|v| v.max(0.0));
        let scale = &self.norm.gamma / &self.norm.running_var.mapv(|v| (v + BN_EPS).sqrt());
        let shift = &self.norm.beta - &(&self.norm.running_mean * &scale);
        h * &scale + &shift
    }

    fn forward(&mut self, input: Array2<f64>, phase: Phase) -> (Array2<f64>, BlockCache) {
        let pre = self.dense.apply(&input.view());
        let act = pre.mapv(|v| v.max(0.0));
        let rows = act.nrows() as f64;
        let (mean, var) = match phase {
            Phase::Train => {
                let mean = act.mean_axis(Axis(0)).expect("non-empty batch");
                let centered = &act - &mean;
                let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / rows;
                let unbiased = &var * (rows / (rows - 1.0));
                self.norm.running_mean = &self.norm.running_mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM);
                self.norm.running_var = &self.norm.running_var * BN_MOMENTUM + &unbiased * (1.0 - BN_MOMENTUM);
                (mean, var)
            }
            Phase::Eval => (self.norm.running_mean.clone(), self.norm.running_var.clone()),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let xhat = (&act - &mean) * &inv_std;
        let out = &xhat * &self.norm.gamma + &self.norm.beta;
        (
            out,
            BlockCache {
                input,
                pre,
                xhat,
                inv_std,
            },
        )
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the block input.
    fn backward(&self, cache: &BlockCache, dout: &Array2<f64>, phase: Phase, grad: &mut Block) -> Array2<f64> {
        let rows = dout.nrows() as f64;
        grad.norm.gamma += &(dout * &cache.xhat).sum_axis(Axis(0));
        grad.norm.beta += &dout.sum_axis(Axis(0));
        let dxhat = dout * &self.norm.gamma;
        let dact = match phase {
            Phase::Train => {
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                let inner = &dxhat * rows - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
                inner * &(&cache.inv_std / rows)
            }
            Phase::Eval => dxhat * &cache.inv_std,
        };
        let mut dpre = dact;
        ndarray::Zip::from(&mut dpre)
            .and(&cache.pre)
            .for_each(|d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
        grad.dense.weight += &cache.input.t().dot(&dpre);
        grad.dense.bias += &dpre.sum_axis(Axis(0));
        dpre.dot(&self.dense.weight.t())
    }
}

/// All weights, biases, and batch-norm state of the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub x_blocks: [Block; 2],
    pub z_blocks: [Block; 2],
    pub trunk: Block,
    pub out: Dense,
    version: u64,
}

impl GeneratorParams {
    /// He-normal weights, zero biases, unit batch-norm scale.
    pub fn init(n: usize, m: usize, k: usize, rng: &mut impl Rng) -> Result<Self> {
        check_dims(n, m, k)?;
        Ok(Self {
            n,
            m,
            k,
            x_blocks: [
                Block::new(Dense::he_normal(n, HIDDEN, rng)),
                Block::new(Dense::he_normal(HIDDEN, HIDDEN, rng)),
            ],
            z_blocks: [
                Block::new(Dense::he_normal(k, HIDDEN, rng)),
                Block::new(Dense::he_normal(HIDDEN, HIDDEN, rng)),
            ],
            trunk: Block::new(Dense::he_normal(2 * HIDDEN, HIDDEN, rng)),
            out: Dense::he_normal(HIDDEN, m, rng),
            version: 0,
        })
    }

    /// Every weight and bias zero; batch-norm state at its initial values.
    pub fn zeros(n: usize, m: usize, k: usize) -> Result<Self> {
        check_dims(n, m, k)?;
        Ok(Self::zeros_unchecked(n, m, k))
    }

    fn zeros_unchecked(n: usize, m: usize, k: usize) -> Self {
        Self {
            n,
            m,
            k,
            x_blocks: [Block::new(Dense::zeros(n, HIDDEN)), Block::new(Dense::zeros(HIDDEN, HIDDEN))],
            z_blocks: [Block::new(Dense::zeros(k, HIDDEN)), Block::new(Dense::zeros(HIDDEN, HIDDEN))],
            trunk: Block::new(Dense::zeros(2 * HIDDEN, HIDDEN)),
            out: Dense::zeros(HIDDEN, m),
            version: 0,
        }
    }

    /// A gradient accumulator shaped like `self`, all zero.
    fn zero_grad(&self) -> Self {
        let mut g = Self::zeros_unchecked(self.n, self.m, self.k);
        for b in g.blocks_mut() {
            b.norm.gamma.fill(0.0);
            b.norm.running_var.fill(0.0);
        }
        g
    }

    /// Number of trainable scalars for the given dimensions.
    pub fn param_count_for(n: usize, m: usize, k: usize) -> usize {
        let h = HIDDEN;
        let affine = |i: usize, o: usize| i * o + o;
        affine(n, h) + affine(h, h) + affine(k, h) + affine(h, h) + affine(2 * h, h) + affine(h, m) + 5 * 2 * h
    }

    pub fn param_count(&self) -> usize {
        self.flat_trainable().len()
    }

    /// Monotone counter bumped whenever trainable values change.
    pub fn version(&self) -> u64 {
        self.version
    }

    fn blocks(&self) -> [&Block; 5] {
        [&self.x_blocks[0], &self.x_blocks[1], &self.z_blocks[0], &self.z_blocks[1], &self.trunk]
    }

    fn blocks_mut(&mut self) -> [&mut Block; 5] {
        let [x0, x1] = &mut self.x_blocks;
        let [z0, z1] = &mut self.z_blocks;
        [x0, x1, z0, z1, &mut self.trunk]
    }

    /// Trainable values in a fixed order: per block weight, bias, gamma,
    /// beta; then the output weight and bias.
    pub fn flat_trainable(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in self.blocks() {
            out.extend(b.dense.weight.iter());
            out.extend(b.dense.bias.iter());
            out.extend(b.norm.gamma.iter());
            out.extend(b.norm.beta.iter());
        }
        out.extend(self.out.weight.iter());
        out.extend(self.out.bias.iter());
        out
    }

    pub fn set_flat_trainable(&mut self, values: &[f64]) -> Result<()> {
        let expected = Self::param_count_for(self.n, self.m, self.k);
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} trainable values, got {}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| {
            for d in dst {
                *d = it.next().expect("length checked");
            }
        };
        for b in self.blocks_mut() {
            fill(&mut b.dense.weight.iter_mut());
            fill(&mut b.dense.bias.iter_mut());
            fill(&mut b.norm.gamma.iter_mut());
            fill(&mut b.norm.beta.iter_mut());
        }
        fill(&mut self.out.weight.iter_mut());
        fill(&mut self.out.bias.iter_mut());
        self.version += 1;
        Ok(())
    }

    fn check_inputs(&self, x: &ArrayView2<f64>, z: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n || z.ncols() != self.k || x.nrows() != z.nrows() || x.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "x is {}x{} and z is {}x{}; expected equal non-zero row counts with {} and {} columns",
                x.nrows(),
                x.ncols(),
                z.nrows(),
                z.ncols(),
                self.n,
                self.k
            )));
        }
        Ok(())
    }

    /// Eval-mode forward pass; a pure function of `(self, x, z)` row by row.
    pub fn forward_eval(&self, x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(&x, &z)?;
        let hx = self.x_blocks[1].forward_eval(&self.x_blocks[0].forward_eval(&x).view());
        let hz = self.z_blocks[1].forward_eval(&self.z_blocks[0].forward_eval(&z).view());
        let joined = concatenate(Axis(1), &[hx.view(), hz.view()]).expect("equal row counts");
        let t = self.trunk.forward_eval(&joined.view());
        Ok(self.out.apply(&t.view()))
    }

    /// Generates `count` eval-mode draws at a single input `x`.
    pub fn sample(&self, x: &[f64], count: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
        if count < 1 {
            return Err(Error::Config("sample count must be >= 1".into()));
        }
        if x.len() != self.n {
            return Err(Error::Dimension(format!("x has {} values, expected {}", x.len(), self.n)));
        }
        let xs = Array2::from_shape_fn((count, self.n), |(_, j)| x[j]);
        let zs = standard_normal((count, self.k), rng);
        let ys = self.forward_eval(xs.view(), zs.view())?;
        Ok(ys.outer_iter().map(|r| r.to_vec()).collect())
    }
}

fn check_dims(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::Config(format!("dimensions must be positive, got n={n}, m={m}, k={k}")));
    }
    Ok(())
}

/// Distribution of the generator's noise input: `dim` independent standard
/// normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub dim: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { dim: 1 }
    }
}

impl NoiseSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("noise dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }

    /// `rows x dim` noise matrix.
    pub fn sample(&self, rows: usize, rng: &mut impl Rng) -> Array2<f64> {
        standard_normal((rows, self.dim), rng)
    }
}

/// Matrix of independent standard-normal draws.
pub fn standard_normal(shape: (usize, usize), rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    phase: Phase,
    rows: usize,
    x_blocks: [BlockCache; 2],
    z_blocks: [BlockCache; 2],
    trunk: BlockCache,
    trunk_out: Array2<f64>,
}

impl ForwardCache {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Forward pass that keeps every intermediate needed by [`backward`]. Train
/// mode normalizes with batch statistics and updates the running ones.
pub fn forward(
    params: &mut GeneratorParams,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    phase: Phase,
) -> Result<(Array2<f64>, ForwardCache)> {
    params.check_inputs(&x, &z)?;
    let rows = x.nrows();
    if phase == Phase::Train && rows < 2 {
        return Err(Error::BatchTooSmall(rows));
    }
    let [x0, x1] = &mut params.x_blocks;
    let (hx, cx0) = x0.forward(x.to_owned(), phase);
    let (hx, cx1) = x1.forward(hx, phase);
    let [z0, z1] = &mut params.z_blocks;
    let (hz, cz0) = z0.forward(z.to_owned(), phase);
    let (hz, cz1) = z1.forward(hz, phase);
    let joined = concatenate(Axis(1), &[hx.view(), hz.view()]).expect("equal row counts");
    let (t, ct) = params.trunk.forward(joined, phase);
    let y = params.out.apply(&t.view());
    Ok((
        y,
        ForwardCache {
            version: params.version,
            phase,
            rows,
            x_blocks: [cx0, cx1],
            z_blocks: [cz0, cz1],
            trunk: ct,
            trunk_out: t,
        },
    ))
}

/// Exact gradient of `sum_rows <dl_dy, y>` with respect to every trainable
/// value, returned in the shape of the parameters (running statistics of
/// the result are zero).
pub fn backward(params: &GeneratorParams, cache: &ForwardCache, dl_dy: ArrayView2<f64>) -> Result<GeneratorParams> {
    if cache.version != params.version {
        return Err(Error::StaleCache(format!(
            "cache built at version {}, parameters are at version {}",
            cache.version, params.version
        )));
    }
    if dl_dy.nrows() != cache.rows || dl_dy.ncols() != params.m {
        return Err(Error::StaleCache(format!(
            "upstream gradient is {}x{}, forward produced {}x{}",
            dl_dy.nrows(),
            dl_dy.ncols(),
            cache.rows,
            params.m
        )));
    }
    let mut grad = params.zero_grad();
    let dy = dl_dy.to_owned();
    grad.out.weight += &cache.trunk_out.t().dot(&dy);
    grad.out.bias += &dy.sum_axis(Axis(0));
    let dt = dy.dot(&params.out.weight.t());

    let djoined = params.trunk.backward(&cache.trunk, &dt, cache.phase, &mut grad.trunk);
    let dhx = djoined.slice(s![.., ..HIDDEN]).to_owned();
    let dhz = djoined.slice(s![.., HIDDEN..]).to_owned();

    let [gx0, gx1] = &mut grad.x_blocks;
    let d = params.x_blocks[1].backward(&cache.x_blocks[1], &dhx, cache.phase, gx1);
    params.x_blocks[0].backward(&cache.x_blocks[0], &d, cache.phase, gx0);
    let [gz0, gz1] = &mut grad.z_blocks;
    let d = params.z_blocks[1].backward(&cache.z_blocks[1], &dhz, cache.phase, gz1);
    params.z_blocks[0].backward(&cache.z_blocks[0], &d, cache.phase, gz0);
    Ok(grad)
}

/// Adam optimizer state over the flattened trainable values.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &GeneratorParams, learning_rate: f64) -> Self {
        let len = params.param_count();
        Self {
            first: vec![0.0; len],
            second: vec![0.0; len],
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step(state: &mut AdamState, params: &mut GeneratorParams, grads: &GeneratorParams) -> Result<()> {
    let g = grads.flat_trainable();
    let mut theta = params.flat_trainable();
    adam_update(state, &mut theta, &g)?;
    params.set_flat_trainable(&theta)
}

/// Adam on plain slices.
pub fn adam_update(state: &mut AdamState, theta: &mut [f64], grad: &[f64]) -> Result<()> {
    if grad.len() != theta.len() || state.first.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "adam state holds {} values, parameters {}, gradient {}",
            state.first.len(),
            theta.len(),
            grad.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        let bad = grad.iter().filter(|g| !g.is_finite()).count();
        return Err(Error::NonFinite(format!(
            "gradient: {bad} of {} entries non-finite, first at index {i} ({})",
            grad.len(),
            grad[i]
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (((w, &gi), m), v) in theta.iter_mut().zip(grad).zip(&mut state.first).zip(&mut state.second) {
        *m = state.beta1 * *m + (1.0 - state.beta1) * gi;
        *v = state.beta2 * *v + (1.0 - state.beta2) * gi * gi;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *w -= state.learning_rate * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

impl GeneratorParams {
    fn named_tensors(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, b) in ["x0", "x1", "z0", "z1", "trunk"].iter().zip(self.blocks()) {
            out.push((format!("{name}.weight"), b.dense.weight.iter().copied().collect()));
            out.push((format!("{name}.bias"), b.dense.bias.to_vec()));
            out.push((format!("{name}.gamma"), b.norm.gamma.to_vec()));
            out.push((format!("{name}.beta"), b.norm.beta.to_vec()));
            out.push((format!("{name}.running_mean"), b.norm.running_mean.to_vec()));
            out.push((format!("{name}.running_var"), b.norm.running_var.to_vec()));
        }
        out.push(("out.weight".into(), self.out.weight.iter().copied().collect()));
        out.push(("out.bias".into(), self.out.bias.to_vec()));
        out
    }

    fn tensor_mut(&mut self, name: &str) -> Option<Box<dyn Iterator<Item = &mut f64> + '_>> {
        let (layer, field) = name.split_once('.')?;
        if layer == "out" {
            return match field {
                "weight" => Some(Box::new(self.out.weight.iter_mut())),
                "bias" => Some(Box::new(self.out.bias.iter_mut())),
                _ => None,
            };
        }
        let idx = ["x0", "x1", "z0", "z1", "trunk"].iter().position(|&l| l == layer)?;
        let b = self.blocks_mut().into_iter().nth(idx)?;
        match field {
            "weight" => Some(Box::new(b.dense.weight.iter_mut())),
            "bias" => Some(Box::new(b.dense.bias.iter_mut())),
            "gamma" => Some(Box::new(b.norm.gamma.iter_mut())),
            "beta" => Some(Box::new(b.norm.beta.iter_mut())),
            "running_mean" => Some(Box::new(b.norm.running_mean.iter_mut())),
            "running_var" => Some(Box::new(b.norm.running_var.iter_mut())),
            _ => None,
        }
    }
}

/// A generator plus named real-valued metadata (standardization statistics,
/// bandwidth, and so on).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: GeneratorParams,
    pub meta: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn new(params: GeneratorParams) -> Self {
        Self {
            params,
            meta: BTreeMap::new(),
        }
    }

    /// Text serialization: a versioned header with the architecture, then
    /// one `meta` or `tensor` line per entry. Values round-trip exactly.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "n {}\nm {}\nk {}\nhidden {HIDDEN}", p.n, p.m, p.k);
        for (key, values) in &self.meta {
            let _ = write!(s, "meta {key} {}", values.len());
            for v in values {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
        for (name, values) in p.named_tensors() {
            let _ = write!(s, "tensor {name} {}", values.len());
            for v in values {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Data(format!("checkpoint line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [magic, version] if *magic == CHECKPOINT_MAGIC => {
                if version.parse::<u32>().ok() != Some(CHECKPOINT_VERSION) {
                    return Err(bad(1, &format!("unsupported version {version}")));
                }
            }
            _ => return Err(bad(1, "missing checkpoint header")),
        }
        let mut dims = [0usize; 4];
        for (slot, key) in dims.iter_mut().zip(["n", "m", "k", "hidden"]) {
            let (no, line) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let value = line
                .strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(no, &format!("expected `{key} <count>`")))?;
            *slot = value;
        }
        let [n, m, k, hidden] = dims;
        if hidden != HIDDEN {
            return Err(bad(5, &format!("hidden width {hidden} unsupported (expected {HIDDEN})")));
        }
        let mut params = GeneratorParams::zeros(n, m, k)?;
        let mut meta = BTreeMap::new();
        let mut seen = 0usize;
        let mut ended = false;
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            let name = parts.next().ok_or_else(|| bad(no, "missing name"))?.to_string();
            let len: usize = parts
                .next()
                .and_then(|l| l.parse().ok())
                .ok_or_else(|| bad(no, "missing length"))?;
            let values = parts
                .map(|v| v.parse::<f64>().map_err(|_| bad(no, &format!("bad number {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != len {
                return Err(bad(no, &format!("declared {len} values, found {}", values.len())));
            }
            match kind {
                "meta" => {
                    meta.insert(name, values);
                }
                "tensor" => {
                    let dst = params
                        .tensor_mut(&name)
                        .ok_or_else(|| bad(no, &format!("unknown tensor {name}")))?;
                    let mut count = 0;
                    let mut src = values.iter();
                    for d in dst {
                        *d = *src.next().ok_or_else(|| bad(no, &format!("{name}: too few values")))?;
                        count += 1;
                    }
                    if count != len {
                        return Err(bad(no, &format!("{name}: expected {count} values, found {len}")));
                    }
                    seen += 1;
                }
                other => return Err(bad(no, &format!("unknown record kind {other:?}"))),
            }
        }
        if !ended {
            return Err(Error::Data("checkpoint is truncated (no `end` line)".into()));
        }
        if seen != 5 * 6 + 2 {
            return Err(Error::Data(format!("checkpoint holds {seen} tensors, expected 32")));
        }
        Ok(Self { params, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
