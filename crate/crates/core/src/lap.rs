//! Exact linear assignment solvers.
//!
//! Both solvers are shortest-augmenting-path methods that keep one dual
//! potential per column. The dense solver runs the classic three phases
//! (column reduction with reduction transfer, augmenting row reduction, then
//! augmentation). The sparse solver runs the same two reductions over the
//! stored entries, then a heap-driven Dijkstra per remaining free row.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Largest `n` accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX: usize = 10;

/// Square matrix of non-negative, finite costs stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidCost(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidCost(format!(
                "entry ({}, {}) = {} is not a finite non-negative cost",
                pos / n.max(1),
                pos % n.max(1),
                data[pos]
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCost(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Total cost of a row-to-column permutation.
    pub fn cost_of(&self, row_to_col: &[usize]) -> f64 {
        row_to_col.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Row-compressed cost structure; only stored entries are admissible edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCostMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    costs: Vec<f64>,
}

impl SparseCostMatrix {
    /// Builds from per-row `(column, cost)` lists. Columns within a row must be
    /// strictly increasing and every row must hold at least one entry.
    /// Builds from raw CSR arrays, with the same checks as [`Self::from_rows`].
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, costs: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != cols.len() || cols.len() != costs.len() {
            return Err(Error::InvalidCost(format!(
                "inconsistent CSR arrays: {} row pointers, {} columns, {} costs for n = {n}",
                row_ptr.len(),
                cols.len(),
                costs.len()
            )));
        }
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if hi <= lo {
                return Err(Error::InvalidCost(format!("row {i} has no entries")));
            }
            for e in lo..hi {
                let (j, c) = (cols[e], costs[e]);
                if j >= n {
                    return Err(Error::InvalidCost(format!(
                        "row {i}: column {j} out of range for n = {n}"
                    )));
                }
                if e > lo && j <= cols[e - 1] {
                    return Err(Error::InvalidCost(format!(
                        "row {i}: columns must be strictly increasing (saw {j} after {})",
                        cols[e - 1]
                    )));
                }
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidCost(format!(
                        "entry ({i}, {j}) = {c} is not a finite non-negative cost"
                    )));
                }
            }
        }
        Ok(Self { n, row_ptr, cols, costs })
    }

    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::InvalidCost(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut costs = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidCost(format!("row {i} has no entries")));
            }
            let mut prev: Option<usize> = None;
            for (j, c) in row {
                if j >= n {
                    return Err(Error::InvalidCost(format!(
                        "row {i}: column {j} out of range for n = {n}"
                    )));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(Error::InvalidCost(format!(
                        "row {i}: columns must be strictly increasing (saw {j} after {})",
                        prev.unwrap()
                    )));
                }
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidCost(format!(
                        "entry ({i}, {j}) = {c} is not a finite non-negative cost"
                    )));
                }
                prev = Some(j);
                cols.push(j);
                costs.push(c);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            costs,
        })
    }

    /// Every entry of a dense matrix stored explicitly.
    pub fn from_dense(dense: &CostMatrix) -> Self {
        let n = dense.n();
        Self {
            n,
            row_ptr: (0..=n).map(|i| i * n).collect(),
            cols: (0..n).cycle().take(n * n).collect(),
            costs: dense.as_slice().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.costs[span])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, costs) = self.row(i);
        cols.binary_search(&j).ok().map(|k| costs[k])
    }
}

/// A perfect matching of rows to columns and its summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn col_to_row(&self) -> Vec<usize> {
        let mut out = vec![NONE; self.row_to_col.len()];
        for (i, &j) in self.row_to_col.iter().enumerate() {
            out[j] = i;
        }
        out
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.row_to_col.len();
        let mut seen = vec![false; n];
        self.row_to_col
            .iter()
            .all(|&j| j < n && !std::mem::replace(&mut seen[j], true))
    }
}

/// Solves the dense assignment problem exactly.
pub fn solve_dense(cost: &CostMatrix) -> Assignment {
    let n = cost.n();
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            total_cost: 0.0,
        };
    }
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![0.0; n];

    let mut free = column_reduction(cost, &mut x, &mut y, &mut v);
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        free = augmenting_row_reduction(cost, free, &mut x, &mut y, &mut v);
    }
    if !free.is_empty() {
        augment_dense(cost, &free, &mut x, &mut y, &mut v);
    }

    // x can hold stale entries for rows freed during row reduction; y is
    // authoritative.
    let mut row_to_col = vec![NONE; n];
    for (j, &i) in y.iter().enumerate() {
        row_to_col[i] = j;
    }
    let total_cost = cost.cost_of(&row_to_col);
    Assignment {
        row_to_col,
        total_cost,
    }
}

fn column_reduction(cost: &CostMatrix, x: &mut [usize], y: &mut [usize], v: &mut [f64]) -> Vec<usize> {
    let n = cost.n();
    v.fill(f64::INFINITY);
    let mut argmin = vec![0usize; n];
    for i in 0..n {
        for (j, &c) in cost.row(i).iter().enumerate() {
            if c < v[j] {
                v[j] = c;
                argmin[j] = i;
            }
        }
    }

    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = argmin[j];
        if x[i] == NONE {
            x[i] = j;
            y[j] = i;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }

    let mut free = Vec::new();
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            // Reduction transfer: move the row's slack onto its column.
            let j = x[i];
            let slack = cost
                .row(i)
                .iter()
                .zip(v.iter())
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, (&c, &vk))| c - vk)
                .fold(f64::INFINITY, f64::min);
            if slack.is_finite() {
                v[j] -= slack;
            }
        }
    }
    free
}

fn augmenting_row_reduction(
    cost: &CostMatrix,
    mut free: Vec<usize>,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let n = cost.n();
    let n_free = free.len();
    let mut current = 0;
    let mut new_free = 0;
    let mut rr_cnt = 0usize;

    while current < n_free {
        rr_cnt += 1;
        let free_i = free[current];
        current += 1;

        let row = cost.row(free_i);
        let (mut u1, mut j1) = (row[0] - v[0], 0usize);
        let (mut u2, mut j2) = (f64::INFINITY, NONE);
        for j in 1..n {
            let c = row[j] - v[j];
            if c < u2 {
                if c >= u1 {
                    u2 = c;
                    j2 = j;
                } else {
                    u2 = u1;
                    j2 = j1;
                    u1 = c;
                    j1 = j;
                }
            }
        }

        let mut i0 = y[j1];
        let v1_new = v[j1] - (u2 - u1);
        let v1_lowers = v1_new < v[j1];
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = y[j2];
            }
            if i0 != NONE {
                if v1_lowers {
                    current -= 1;
                    free[current] = i0;
                } else {
                    free[new_free] = i0;
                    new_free += 1;
                }
            }
        } else if i0 != NONE {
            free[new_free] = i0;
            new_free += 1;
        }
        x[free_i] = j1;
        y[j1] = free_i;
    }
    free.truncate(new_free);
    free
}

fn augment_dense(cost: &CostMatrix, free: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    let n = cost.n();
    let mut pred = vec![0usize; n];
    let mut cols: Vec<usize> = (0..n).collect();
    let mut d = vec![0.0; n];
    for &free_i in free {
        let mut j = find_path_dense(cost, free_i, y, v, &mut d, &mut cols, &mut pred);
        loop {
            let i = pred[j];
            y[j] = i;
            std::mem::swap(&mut j, &mut x[i]);
            if i == free_i {
                break;
            }
        }
    }
}

/// Shortest augmenting path from `start` in reduced costs. Columns in
/// `cols[..lo]` are finalized, `cols[lo..hi]` sit at the current minimum
/// distance, and `cols[hi..]` are still open.
fn find_path_dense(
    cost: &CostMatrix,
    start: usize,
    y: &[usize],
    v: &mut [f64],
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
) -> usize {
    let n = cost.n();
    for (k, c) in cols.iter_mut().enumerate() {
        *c = k;
    }
    let row = cost.row(start);
    for j in 0..n {
        pred[j] = start;
        d[j] = row[j] - v[j];
    }

    let mut lo = 0;
    let mut hi = 0;
    let mut n_ready = 0;
    let mut final_j = NONE;
    while final_j == NONE {
        if lo == hi {
            n_ready = lo;
            hi = collect_minima(lo, d, cols);
            if let Some(&j) = cols[lo..hi].iter().rev().find(|&&j| y[j] == NONE) {
                final_j = j;
            }
        }
        if final_j == NONE {
            if let Some(j) = scan_dense(cost, &mut lo, &mut hi, d, cols, pred, y, v) {
                final_j = j;
            }
        }
    }

    let mind = d[cols[lo]];
    for &j in &cols[..n_ready] {
        v[j] += d[j] - mind;
    }
    final_j
}

/// Moves every open column with the smallest distance to `cols[lo..hi]` and
/// returns `hi`.
fn collect_minima(lo: usize, d: &[f64], cols: &mut [usize]) -> usize {
    let n = cols.len();
    let mut hi = lo + 1;
    let mut mind = d[cols[lo]];
    for k in hi..n {
        let j = cols[k];
        if d[j] <= mind {
            if d[j] < mind {
                hi = lo;
                mind = d[j];
            }
            cols[k] = cols[hi];
            cols[hi] = j;
            hi += 1;
        }
    }
    hi
}

#[allow(clippy::too_many_arguments)]
fn scan_dense(
    cost: &CostMatrix,
    plo: &mut usize,
    phi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[usize],
    v: &[f64],
) -> Option<usize> {
    let n = cost.n();
    let mut lo = *plo;
    let mut hi = *phi;
    while lo != hi {
        let j = cols[lo];
        lo += 1;
        let i = y[j];
        let mind = d[j];
        let row = cost.row(i);
        let h = row[j] - v[j] - mind;
        for k in hi..n {
            let j = cols[k];
            let cred = row[j] - v[j] - h;
            if cred < d[j] {
                d[j] = cred;
                pred[j] = i;
                if cred == mind {
                    if y[j] == NONE {
                        return Some(j);
                    }
                    cols[k] = cols[hi];
                    cols[hi] = j;
                    hi += 1;
                }
            }
        }
    }
    *plo = lo;
    *phi = hi;
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    col: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then column index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves the assignment problem restricted to the stored entries.
///
/// Returns [`Error::Infeasible`] when the stored entries admit no perfect
/// matching.
pub fn solve_sparse(cost: &SparseCostMatrix) -> Result<Assignment> {
    let n = cost.n();
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![0.0; n];

    let mut free = sparse_column_reduction(cost, &mut x, &mut y, &mut v);
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        free = sparse_row_reduction(cost, free, &mut x, &mut y, &mut v);
    }
    x.fill(NONE);
    let mut assigned_cost = vec![0.0; n];
    for (j, &i) in y.iter().enumerate() {
        if i != NONE {
            x[i] = j;
            assigned_cost[i] = cost.get(i, j).expect("assigned entries are stored");
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| x[i] == NONE).collect();

    let mut d = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut pred_cost = vec![0.0; n];
    let mut seen = vec![0u32; n];
    let mut done = vec![0u32; n];
    let mut stamp = 0u32;
    let mut heap = BinaryHeap::new();
    let mut scanned = Vec::new();

    for &start in &free {
        stamp += 1;
        heap.clear();
        scanned.clear();

        let (cols, costs) = cost.row(start);
        for (&j, &c) in cols.iter().zip(costs) {
            d[j] = c - v[j];
            pred[j] = start;
            pred_cost[j] = c;
            seen[j] = stamp;
            heap.push(HeapItem { dist: d[j], col: j });
        }

        let mut found = None;
        while let Some(HeapItem { dist, col: j }) = heap.pop() {
            if done[j] == stamp || dist > d[j] {
                continue;
            }
            done[j] = stamp;
            let i = y[j];
            if i == NONE {
                found = Some((j, dist));
                break;
            }
            scanned.push(j);
            let h = dist - (assigned_cost[i] - v[j]);
            let (cols, costs) = cost.row(i);
            for (&j2, &c2) in cols.iter().zip(costs) {
                if done[j2] == stamp {
                    continue;
                }
                let nd = h + c2 - v[j2];
                if seen[j2] != stamp || nd < d[j2] {
                    seen[j2] = stamp;
                    d[j2] = nd;
                    pred[j2] = i;
                    pred_cost[j2] = c2;
                    heap.push(HeapItem { dist: nd, col: j2 });
                }
            }
        }

        let (end, total) = found.ok_or(Error::Infeasible { row: start })?;
        for &j in &scanned {
            v[j] += d[j] - total;
        }
        let mut j = end;
        loop {
            let i = pred[j];
            y[j] = i;
            assigned_cost[i] = pred_cost[j];
            std::mem::swap(&mut j, &mut x[i]);
            if i == start {
                break;
            }
        }
    }

    let total_cost = assigned_cost.iter().sum();
    Ok(Assignment {
        row_to_col: x,
        total_cost,
    })
}

fn sparse_column_reduction(cost: &SparseCostMatrix, x: &mut [usize], y: &mut [usize], v: &mut [f64]) -> Vec<usize> {
    let n = cost.n();
    v.fill(f64::INFINITY);
    let mut argmin = vec![NONE; n];
    for i in 0..n {
        let (cols, costs) = cost.row(i);
        for (&j, &c) in cols.iter().zip(costs) {
            if c < v[j] {
                v[j] = c;
                argmin[j] = i;
            }
        }
    }

    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = argmin[j];
        if i == NONE {
            // no stored entry; the augmentation phase reports infeasibility
            v[j] = 0.0;
        } else if x[i] == NONE {
            x[i] = j;
            y[j] = i;
        } else {
            unique[i] = false;
        }
    }

    let mut free = Vec::new();
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            let j = x[i];
            let (cols, costs) = cost.row(i);
            let slack = cols
                .iter()
                .zip(costs)
                .filter(|&(&k, _)| k != j)
                .map(|(&k, &c)| c - v[k])
                .fold(f64::INFINITY, f64::min);
            if slack.is_finite() {
                v[j] -= slack;
            }
        }
    }
    free
}

fn sparse_row_reduction(
    cost: &SparseCostMatrix,
    mut free: Vec<usize>,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let n = cost.n();
    let n_free = free.len();
    let mut current = 0;
    let mut new_free = 0;
    let mut rr_cnt = 0usize;

    while current < n_free {
        rr_cnt += 1;
        let free_i = free[current];
        current += 1;

        let (cols, costs) = cost.row(free_i);
        // among equal reduced costs an unassigned column ranks first
        let (mut u1, mut j1, mut t1) = (f64::INFINITY, NONE, true);
        let (mut u2, mut j2, mut t2) = (f64::INFINITY, NONE, true);
        for (&j, &c) in cols.iter().zip(costs) {
            let r = c - v[j];
            let t = y[j] != NONE;
            if (r, t) < (u2, t2) {
                if (r, t) >= (u1, t1) {
                    (u2, j2, t2) = (r, j, t);
                } else {
                    (u2, j2, t2) = (u1, j1, t1);
                    (u1, j1, t1) = (r, j, t);
                }
            }
        }

        let mut i0 = y[j1];
        let v1_new = if u2.is_finite() { v[j1] - (u2 - u1) } else { v[j1] };
        let v1_lowers = v1_new < v[j1];
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = y[j2];
            }
            if i0 != NONE {
                if v1_lowers {
                    current -= 1;
                    free[current] = i0;
                } else {
                    free[new_free] = i0;
                    new_free += 1;
                }
            }
        } else if i0 != NONE {
            free[new_free] = i0;
            new_free += 1;
        }
        x[free_i] = j1;
        y[j1] = free_i;
    }
    free.truncate(new_free);
    free
}

/// Exhaustive minimum over all permutations. Ties resolve to the
/// lexicographically smallest permutation.
pub fn brute_force(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.n();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.cost_of(&perm);
    while next_permutation(&mut perm) {
        let c = cost.cost_of(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        row_to_col: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
