//! Ground cost between labeled samples, cost-matrix construction, and the
//! empirical optimal transport cost with its gradient in the generated
//! outputs.

use crate::error::{Error, Result};
use crate::lap::{self, CostMatrix, SparseCostMatrix};
use crate::par;

/// One `(x, y)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }
}

/// A set of labeled samples stored as two row-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, m: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Dimension("x and y dimensions must be positive".into()));
        }
        if x.len() % n != 0 || y.len() % m != 0 || x.len() / n != y.len() / m {
            return Err(Error::Dimension(format!(
                "x has {} values for dimension {n}, y has {} values for dimension {m}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample set".into()));
        }
        Ok(Self { n, m, x, y })
    }

    pub fn from_samples(samples: &[LabeledSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Dimension("empty sample list".into()))?;
        let (n, m) = (first.x.len(), first.y.len());
        let mut x = Vec::with_capacity(n * samples.len());
        let mut y = Vec::with_capacity(m * samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != n || s.y.len() != m {
                return Err(Error::Dimension(format!(
                    "sample {i} has dimensions ({}, {}), expected ({n}, {m})",
                    s.x.len(),
                    s.y.len()
                )));
            }
            x.extend_from_slice(&s.x);
            y.extend_from_slice(&s.y);
        }
        Self::new(n, m, x, y)
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.n
    }

    pub fn y_dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize) -> LabeledSample {
        LabeledSample::new(self.x_row(i).to_vec(), self.y_row(i).to_vec())
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    /// Reorders rows so that row `k` of the result is row `order[k]` here.
    pub fn select(&self, order: &[usize]) -> Self {
        let mut x = Vec::with_capacity(order.len() * self.n);
        let mut y = Vec::with_capacity(order.len() * self.m);
        for &i in order {
            x.extend_from_slice(self.x_row(i));
            y.extend_from_slice(self.y_row(i));
        }
        Self {
            n: self.n,
            m: self.m,
            x,
            y,
        }
    }
}

/// Parameters of the ground cost and of the sparsification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    /// Weight of the x term; `1 - lambda` weighs the y term.
    pub lambda: f64,
    /// Exponent of the weighted L_p distance.
    pub p: f64,
    /// Unique x-neighbours admitted per row in sparse mode.
    pub k_neighbors: usize,
    pub n: usize,
    pub m: usize,
}

impl TransportConfig {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            lambda: 0.9,
            p: 1.0,
            k_neighbors: 10,
            n,
            m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("p must be >= 1, got {}", self.p)));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("feature and target dimensions must be positive".into()));
        }
        Ok(())
    }

    fn check(&self, xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> Result<()> {
        if xa.len() != self.n || xb.len() != self.n || ya.len() != self.m || yb.len() != self.m {
            return Err(Error::Dimension(format!(
                "samples of dimensions ({}, {}) and ({}, {}) for config ({}, {})",
                xa.len(),
                ya.len(),
                xb.len(),
                yb.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

/// Training mode: full cost matrix or the x-neighbour restricted one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Dense,
    Sparse,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Dense => "dla",
            Mode::Sparse => "sla",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dla" | "dense" => Ok(Mode::Dense),
            "sla" | "sparse" => Ok(Mode::Sparse),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected dla or sla)"))),
        }
    }
}

/// A perfect matching between reals and fakes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(real index, fake index)`, one pair per real, ordered by real index.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of matched unit costs.
    pub total_cost: f64,
}

/// Which unique real each real row and each fake row derives from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub n_unique: usize,
    pub real_parent: Vec<usize>,
    pub fake_parent: Vec<usize>,
}

impl Grouping {
    /// Layout produced by repeating each of `n_unique` reals `sample_size`
    /// times, with fakes grouped the same way.
    pub fn repeated(n_unique: usize, sample_size: usize) -> Self {
        let parents: Vec<usize> = (0..n_unique * sample_size).map(|i| i / sample_size).collect();
        Self {
            n_unique,
            real_parent: parents.clone(),
            fake_parent: parents,
        }
    }
}

#[inline]
fn pow_abs(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d.abs()
    } else if p == 2.0 {
        d * d
    } else {
        d.abs().powf(p)
    }
}

#[inline]
fn powered_sum(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter().zip(b).map(|(u, v)| pow_abs(u - v, p)).sum()
}

#[inline]
fn root(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        s
    } else if p == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / p)
    }
}

/// Weighted L_p ground cost on slices; dimensions are not checked.
#[inline]
pub fn unit_cost_parts(xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64], cfg: &TransportConfig) -> f64 {
    Weights::new(cfg).cost(xa, ya, xb, yb)
}

#[derive(Clone, Copy)]
struct Weights {
    wx: f64,
    wy: f64,
    p: f64,
}

impl Weights {
    fn new(cfg: &TransportConfig) -> Self {
        Self {
            wx: cfg.lambda / cfg.n as f64,
            wy: (1.0 - cfg.lambda) / cfg.m as f64,
            p: cfg.p,
        }
    }

    #[inline]
    fn cost(self, xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> f64 {
        let s = self.wx * powered_sum(xa, xb, self.p) + self.wy * powered_sum(ya, yb, self.p);
        root(s, self.p)
    }
}

/// Weighted L_p distance between two labeled samples.
pub fn unit_cost(a: &LabeledSample, b: &LabeledSample, cfg: &TransportConfig) -> Result<f64> {
    cfg.check(&a.x, &a.y, &b.x, &b.y)?;
    Ok(unit_cost_parts(&a.x, &a.y, &b.x, &b.y, cfg))
}

/// Adds `scale * d c(a, b) / d y_b` into `out`. At p = 1 this is the
/// subgradient with `sign(0) = 0`; for p > 1 the derivative at `a == b` is
/// taken as zero.
#[inline]
pub fn add_unit_cost_grad_parts(
    xa: &[f64],
    ya: &[f64],
    xb: &[f64],
    yb: &[f64],
    cfg: &TransportConfig,
    scale: f64,
    out: &mut [f64],
) {
    let wy = (1.0 - cfg.lambda) / cfg.m as f64;
    if cfg.p == 1.0 {
        for ((o, a), b) in out.iter_mut().zip(ya).zip(yb) {
            let d = b - a;
            if d != 0.0 {
                *o += scale * wy * d.signum();
            }
        }
        return;
    }
    let wx = cfg.lambda / cfg.n as f64;
    let s = wx * powered_sum(xa, xb, cfg.p) + wy * powered_sum(ya, yb, cfg.p);
    if s <= 0.0 {
        return;
    }
    // d/dy_b [S^(1/p)] = S^(1/p - 1) * wy * |d|^(p-1) * sign(d)
    let outer = s.powf(1.0 / cfg.p - 1.0);
    for ((o, a), b) in out.iter_mut().zip(ya).zip(yb) {
        let d = b - a;
        if d != 0.0 {
            let mag = if cfg.p == 2.0 { d.abs() } else { d.abs().powf(cfg.p - 1.0) };
            *o += scale * outer * wy * mag * d.signum();
        }
    }
}

/// Gradient of the ground cost with respect to the fake's y.
pub fn unit_cost_grad_fake_y(a: &LabeledSample, b: &LabeledSample, cfg: &TransportConfig) -> Result<Vec<f64>> {
    cfg.check(&a.x, &a.y, &b.x, &b.y)?;
    let mut out = vec![0.0; cfg.m];
    add_unit_cost_grad_parts(&a.x, &a.y, &b.x, &b.y, cfg, 1.0, &mut out);
    Ok(out)
}

fn check_sets(reals: &SampleSet, fakes: &SampleSet, cfg: &TransportConfig) -> Result<()> {
    if reals.len() != fakes.len() {
        return Err(Error::Dimension(format!(
            "{} reals but {} fakes",
            reals.len(),
            fakes.len()
        )));
    }
    for (name, s) in [("reals", reals), ("fakes", fakes)] {
        if s.x_dim() != cfg.n || s.y_dim() != cfg.m {
            return Err(Error::Dimension(format!(
                "{name} have dimensions ({}, {}), config expects ({}, {})",
                s.x_dim(),
                s.y_dim(),
                cfg.n,
                cfg.m
            )));
        }
    }
    Ok(())
}

const SPARSE_CHUNK: usize = 1024;
// entries per task for cost fills, unique points per task for neighbour work
const DENSE_GRAIN: usize = 4096;
const POINT_GRAIN: usize = 64;
const MAX_INLINE_K: usize = 32;

/// Full cost matrix; entry `(i, j)` is the ground cost of real `i` and fake `j`.
pub fn build_dense_cost(reals: &SampleSet, fakes: &SampleSet, cfg: &TransportConfig) -> Result<CostMatrix> {
    check_sets(reals, fakes, cfg)?;
    let n = reals.len();
    let w = Weights::new(cfg);
    let mut data = vec![0.0; n * n];
    if n > 0 {
        let scalar = cfg.n == 1 && cfg.m == 1;
        par::fill_chunks(&mut data, n, (DENSE_GRAIN / n).max(1), |i, row| {
            let (xa, ya) = (reals.x_row(i), reals.y_row(i));
            if scalar {
                let (xa, ya) = (xa[0], ya[0]);
                for ((c, &xb), &yb) in row.iter_mut().zip(fakes.x_values()).zip(fakes.y_values()) {
                    *c = root(w.wx * pow_abs(xa - xb, w.p) + w.wy * pow_abs(ya - yb, w.p), w.p);
                }
            } else {
                for (j, c) in row.iter_mut().enumerate() {
                    *c = w.cost(xa, ya, fakes.x_row(j), fakes.y_row(j));
                }
            }
        });
    }
    CostMatrix::new(n, data)
}

/// For each unique point, itself followed by its `k - 1` nearest other
/// points under the L_p distance, ties broken by lower index. Each list is
/// returned sorted by index.
pub fn unique_neighbors(points: &[&[f64]], k: usize, p: f64) -> Vec<Vec<usize>> {
    let (width, table) = neighbor_table(points, k, p);
    table
        .chunks(width.max(1))
        .map(|near| {
            let mut near = near.to_vec();
            near.sort_unstable();
            near
        })
        .collect()
}

/// Same sets as [`unique_neighbors`], unordered, stored row-major with a
/// fixed width.
fn neighbor_table(points: &[&[f64]], k: usize, p: f64) -> (usize, Vec<usize>) {
    let count = points.len();
    let width = k.clamp(1, count.max(1));
    let take = width - 1;
    if take == 0 {
        return (1, (0..count).collect());
    }
    // sweep outward along the first coordinate, which lower-bounds the distance
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_unstable_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut rank = vec![0; count];
    for (r, &u) in order.iter().enumerate() {
        rank[u] = r;
    }
    let keys: Vec<f64> = order.iter().map(|&u| points[u][0]).collect();
    let one_dim = points.iter().all(|pt| pt.len() == 1);
    let mut table = vec![0; count * width];
    par::fill_chunks(&mut table, width, POINT_GRAIN, |u, out| {
        let here = points[u][0];
        let mut best = [(0.0, 0); MAX_INLINE_K];
        let mut best_vec = Vec::new();
        let best: &mut [(f64, usize)] = if take <= MAX_INLINE_K {
            &mut best[..take]
        } else {
            best_vec.resize(take, (0.0, 0));
            &mut best_vec
        };
        let mut filled = 0;
        let (mut left, mut right) = (rank[u], rank[u] + 1);
        // merge both sides in order of first-coordinate gap
        loop {
            let gl = (left > 0).then(|| here - keys[left - 1]);
            let gr = (right < count).then(|| keys[right] - here);
            let (w, gap) = match (gl, gr) {
                (Some(a), Some(b)) if a <= b => {
                    left -= 1;
                    (order[left], a)
                }
                (_, Some(b)) => {
                    right += 1;
                    (order[right - 1], b)
                }
                (Some(a), None) => {
                    left -= 1;
                    (order[left], a)
                }
                (None, None) => break,
            };
            let bound = pow_abs(gap, p);
            if filled == take && bound > best[take - 1].0 {
                break;
            }
            let dist = if one_dim { bound } else { powered_sum(points[u], points[w], p) };
            let cand = (dist, w);
            let at = best[..filled].partition_point(|b| b.0 < cand.0 || (b.0 == cand.0 && b.1 < cand.1));
            if at < take {
                let end = (filled + 1).min(take);
                best.copy_within(at..end - 1, at + 1);
                best[at] = cand;
                filled = end;
            }
        }
        for (o, b) in out.iter_mut().zip(best.iter()) {
            *o = b.1;
        }
        out[take] = u;
    });
    (width, table)
}

/// Cost matrix restricted to fakes whose parent is among the `k_neighbors`
/// nearest unique reals (in x) of the row's own parent.
pub fn build_sparse_cost(
    reals: &SampleSet,
    fakes: &SampleSet,
    cfg: &TransportConfig,
    grouping: &Grouping,
) -> Result<SparseCostMatrix> {
    check_sets(reals, fakes, cfg)?;
    let n = reals.len();
    if grouping.real_parent.len() != n || grouping.fake_parent.len() != n {
        return Err(Error::Dimension(format!(
            "grouping covers {} reals and {} fakes, sets hold {n}",
            grouping.real_parent.len(),
            grouping.fake_parent.len()
        )));
    }
    let mut representative = vec![usize::MAX; grouping.n_unique];
    for (i, &u) in grouping.real_parent.iter().enumerate() {
        if u >= grouping.n_unique {
            return Err(Error::Dimension(format!("real {i} has parent {u} out of range")));
        }
        if representative[u] == usize::MAX {
            representative[u] = i;
        }
    }
    let mut fake_ptr = vec![0; grouping.n_unique + 1];
    for (j, &u) in grouping.fake_parent.iter().enumerate() {
        if u >= grouping.n_unique {
            return Err(Error::Dimension(format!("fake {j} has parent {u} out of range")));
        }
        fake_ptr[u + 1] += 1;
    }
    if let Some(u) = representative.iter().position(|&r| r == usize::MAX) {
        return Err(Error::Dimension(format!("unique real {u} has no rows")));
    }
    for u in 0..grouping.n_unique {
        fake_ptr[u + 1] += fake_ptr[u];
    }
    let mut fakes_by_parent = vec![0; n];
    let mut next = fake_ptr.clone();
    for (j, &u) in grouping.fake_parent.iter().enumerate() {
        fakes_by_parent[next[u]] = j;
        next[u] += 1;
    }

    let points: Vec<&[f64]> = representative.iter().map(|&i| reals.x_row(i)).collect();
    let (width, neighbors) = neighbor_table(&points, cfg.k_neighbors, cfg.p);

    let mut pattern_ptr = Vec::with_capacity(grouping.n_unique + 1);
    pattern_ptr.push(0);
    let mut patterns = Vec::new();
    for near in neighbors.chunks(width) {
        let from = patterns.len();
        for &w in near {
            patterns.extend_from_slice(&fakes_by_parent[fake_ptr[w]..fake_ptr[w + 1]]);
        }
        patterns[from..].sort_unstable();
        pattern_ptr.push(patterns.len());
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    for &u in &grouping.real_parent {
        row_ptr.push(row_ptr[row_ptr.len() - 1] + pattern_ptr[u + 1] - pattern_ptr[u]);
    }
    let nnz = row_ptr[n];
    let mut cols = Vec::with_capacity(nnz);
    for &u in &grouping.real_parent {
        cols.extend_from_slice(&patterns[pattern_ptr[u]..pattern_ptr[u + 1]]);
    }
    let w = Weights::new(cfg);
    let mut costs = vec![0.0; nnz];
    par::fill_chunks(&mut costs, SPARSE_CHUNK, DENSE_GRAIN / SPARSE_CHUNK, |k, chunk| {
        let start = k * SPARSE_CHUNK;
        let mut i = row_ptr.partition_point(|&r| r <= start) - 1;
        for (e, c) in (start..).zip(chunk.iter_mut()) {
            while row_ptr[i + 1] <= e {
                i += 1;
            }
            let j = cols[e];
            *c = w.cost(reals.x_row(i), reals.y_row(i), fakes.x_row(j), fakes.y_row(j));
        }
    });
    SparseCostMatrix::from_csr(n, row_ptr, cols, costs)
}

/// Empirical OT cost `(1/N) * sum of matched costs` and the optimal plan.
/// Sparse mode needs the batch `grouping`; an infeasible sparse pattern is
/// reported as [`Error::Infeasible`].
pub fn ot_cost_and_plan(
    reals: &SampleSet,
    fakes: &SampleSet,
    cfg: &TransportConfig,
    mode: Mode,
    grouping: Option<&Grouping>,
) -> Result<(f64, TransportPlan)> {
    cfg.validate()?;
    let assignment = match mode {
        Mode::Dense => lap::solve_dense(&build_dense_cost(reals, fakes, cfg)?),
        Mode::Sparse => {
            let g = grouping.ok_or_else(|| Error::Config("sparse mode requires a sample grouping".into()))?;
            lap::solve_sparse(&build_sparse_cost(reals, fakes, cfg, g)?)?
        }
    };
    Ok(plan_from_assignment(assignment.row_to_col, assignment.total_cost))
}

pub(crate) fn plan_from_assignment(row_to_col: Vec<usize>, total_cost: f64) -> (f64, TransportPlan) {
    let n = row_to_col.len();
    let pairs = row_to_col.into_iter().enumerate().collect();
    let cost = if n == 0 { 0.0 } else { total_cost / n as f64 };
    (cost, TransportPlan { pairs, total_cost })
}

/// Gradient of the OT cost with the plan held fixed, with respect to every
/// fake's y; row-major `N x m`.
pub fn plan_gradient(reals: &SampleSet, fakes: &SampleSet, plan: &TransportPlan, cfg: &TransportConfig) -> Vec<f64> {
    let n = fakes.len();
    let m = cfg.m;
    let mut grad = vec![0.0; n * m];
    if n == 0 {
        return grad;
    }
    let scale = 1.0 / n as f64;
    for &(a, b) in &plan.pairs {
        add_unit_cost_grad_parts(
            reals.x_row(a),
            reals.y_row(a),
            fakes.x_row(b),
            fakes.y_row(b),
            cfg,
            scale,
            &mut grad[b * m..(b + 1) * m],
        );
    }
    grad
}

/// OT cost evaluated for a given plan.
pub fn plan_cost(reals: &SampleSet, fakes: &SampleSet, plan: &TransportPlan, cfg: &TransportConfig) -> f64 {
    let n = plan.pairs.len();
    if n == 0 {
        return 0.0;
    }
    plan.pairs
        .iter()
        .map(|&(a, b)| unit_cost_parts(reals.x_row(a), reals.y_row(a), fakes.x_row(b), fakes.y_row(b), cfg))
        .sum::<f64>()
        / n as f64
}

/// `ot_cost^(1/p)`.
pub fn wasserstein_p(ot_cost: f64, p: f64) -> Result<f64> {
    if !(ot_cost >= 0.0) {
        return Err(Error::Config(format!("OT cost must be non-negative, got {ot_cost}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Config(format!("p must be >= 1, got {p}")));
    }
    Ok(ot_cost.powf(1.0 / p))
}
