//! The multivariate comonotonic-shocks Poisson model.
//!
//! Component `i` (0-based) is `X_i = Z_{i0} + ... + Z_{ii}` where shock `j`
//! is the comonotonic vector `(Z_{jj}, ..., Z_{d-1,j})` with Poisson margins
//! `ω_{ij} λ_i`, and distinct shocks are independent.
//!
//! Two exact evaluation routes are provided:
//!
//! * [`joint_pmf`], [`joint_cdf`] and [`bivariate_pmf`] enumerate the latent
//!   shock configurations directly, one observation at a time.
//! * [`JointPmfEvaluator`] and [`BivariatePmfGrid`] tabulate the same
//!   probabilities over a whole box by walking the (totally ordered) support
//!   of each comonotonic shock; the likelihoods use these.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pois::{comono_mass, CdfTable, ComonotonicChain, PoissonRate, QUANTILE_UPPER_MASS};

/// Tolerance on each weight row summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Log-likelihood contribution of an observation with zero probability.
///
/// Finite so that derivative-free optimizers can still rank infeasible points.
pub const LOG_ZERO_SENTINEL: f64 = -1e18;

/// Accumulated shock products below this are pruned during enumeration.
const PRUNE_BELOW: f64 = 1e-300;

/// Validated parameters `(Λ, Ω)` of a `d`-dimensional model.
///
/// `weights[i]` holds `(ω_{i0}, ..., ω_{ii})`, the shares of `λ_i` carried by
/// each shock; every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    lambdas: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl ModelParams {
    /// Validates and (within [`ROW_SUM_TOL`]) renormalizes the rows.
    pub fn new(lambdas: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        ModelParams { lambdas, weights }.validate()
    }

    /// Parameters from rates and the strictly-lower off-diagonal weights
    /// `[[ω10], [ω20, ω21], ...]`; diagonals are the row remainders.
    pub fn from_lower(lambdas: Vec<f64>, lower: &[Vec<f64>]) -> Result<Self> {
        let d = lambdas.len();
        if lower.len() + 1 != d.max(1) {
            return Err(Error::params(
                "omega",
                format!("expected {} off-diagonal rows for d = {d}, got {}", d.saturating_sub(1), lower.len()),
            ));
        }
        let mut weights = vec![vec![1.0]];
        for (r, row) in lower.iter().enumerate() {
            let mut w = row.clone();
            let diag = 1.0 - row.iter().sum::<f64>();
            w.push(if diag.abs() < ROW_SUM_TOL { 0.0 } else { diag });
            if w.len() != r + 2 {
                return Err(Error::params(
                    format!("omega row {}", r + 2),
                    format!("expected {} off-diagonal weights, got {}", r + 1, row.len()),
                ));
            }
            weights.push(w);
        }
        Self::new(lambdas, weights)
    }

    /// All weight on the component's own shock.
    pub fn independent(lambdas: Vec<f64>) -> Result<Self> {
        let weights = (0..lambdas.len())
            .map(|i| {
                let mut row = vec![0.0; i + 1];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::new(lambdas, weights)
    }

    /// All weight on the first shock: a comonotonic vector with Poisson margins.
    pub fn comonotonic(lambdas: Vec<f64>) -> Result<Self> {
        let weights = (0..lambdas.len())
            .map(|i| {
                let mut row = vec![0.0; i + 1];
                row[0] = 1.0;
                row
            })
            .collect();
        Self::new(lambdas, weights)
    }

    /// Checks every invariant and returns the (renormalized) parameters.
    pub fn validate(mut self) -> Result<Self> {
        let d = self.lambdas.len();
        if d == 0 {
            return Err(Error::params("lambda", "dimension must be at least 1"));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::params(
                    format!("lambda[{}]", i + 1),
                    format!("rate must be finite and > 0, got {l}"),
                ));
            }
        }
        if self.weights.len() != d {
            return Err(Error::params(
                "omega",
                format!("expected {d} weight rows, got {}", self.weights.len()),
            ));
        }
        for (i, row) in self.weights.iter_mut().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::params(
                    format!("omega row {}", i + 1),
                    format!("expected {} weights, got {}", i + 1, row.len()),
                ));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                    return Err(Error::params(
                        format!("omega[{}][{}]", i + 1, j + 1),
                        format!("weight must be in [0, 1], got {w}"),
                    ));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::params(
                    format!("omega row {}", i + 1),
                    format!("weights sum to {sum}, not 1"),
                ));
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|w| *w /= sum);
            }
        }
        self.weights[0][0] = 1.0;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `ω_{ij}` for `j <= i`, zero above the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.weights[i][j]
        }
    }

    /// Strictly-lower weights `ω_{ij}, j < i`, row by row.
    pub fn off_diagonal(&self) -> Vec<f64> {
        self.weights
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row[..i].iter().copied())
            .collect()
    }

    /// Rate `ω_{ij} λ_i` of the latent variable `Z_{ij}`.
    pub fn shock_rate(&self, i: usize, j: usize) -> PoissonRate {
        PoissonRate::from_residual(self.weight(i, j) * self.lambdas[i])
    }

    /// Model on the sub-vector `(X_0, ..., X_{k-1})`.
    pub fn leading(&self, k: usize) -> Result<Self> {
        Self::new(self.lambdas[..k].to_vec(), self.weights[..k].to_vec())
    }
}

/// `n × d` matrix of nonnegative counts, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    dim: usize,
    values: Vec<u32>,
}

impl CountMatrix {
    pub fn new(dim: usize, values: Vec<u32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("count matrix needs at least one column"));
        }
        if values.len() % dim != 0 {
            return Err(Error::domain(format!(
                "{} values do not fill rows of width {dim}",
                values.len()
            )));
        }
        Ok(CountMatrix { dim, values })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::domain(format!(
                "row {} has {} entries, expected {dim}",
                r + 1,
                row.len()
            )));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn column_max(&self, c: usize) -> u32 {
        self.rows().map(|r| r[c]).max().unwrap_or(0)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        let mut sums = vec![0u64; self.dim];
        for row in self.rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as u64;
            }
        }
        sums.into_iter().map(|s| s as f64 / n).collect()
    }

    /// Sample covariance with the `n - 1` denominator.
    pub fn sample_cov(&self, a: usize, b: usize) -> f64 {
        let means = self.column_means();
        let (ma, mb) = (means[a], means[b]);
        let s: f64 = self
            .rows()
            .map(|r| (r[a] as f64 - ma) * (r[b] as f64 - mb))
            .sum();
        s / (self.n_rows() as f64 - 1.0)
    }

    /// Rows picked by index (used for resampling).
    pub fn select(&self, idx: &[usize]) -> CountMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.dim);
        for &r in idx {
            values.extend_from_slice(self.row(r));
        }
        CountMatrix {
            dim: self.dim,
            values,
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn permute_columns(&self, order: &[usize]) -> Result<CountMatrix> {
        if order.is_empty() || order.iter().any(|&c| c >= self.dim) {
            return Err(Error::domain("column order out of range"));
        }
        let values = self
            .rows()
            .flat_map(|r| order.iter().map(move |&c| r[c]))
            .collect();
        CountMatrix::new(order.len(), values)
    }

    /// Distinct rows with multiplicities, in lexicographic order.
    pub fn tabulate(&self) -> CountTable {
        let mut counts: BTreeMap<&[u32], u32> = BTreeMap::new();
        for row in self.rows() {
            *counts.entry(row).or_default() += 1;
        }
        let mut rows = Vec::with_capacity(counts.len() * self.dim);
        let mut weights = Vec::with_capacity(counts.len());
        for (row, c) in counts {
            rows.extend_from_slice(row);
            weights.push(c as f64);
        }
        let maxima = (0..self.dim).map(|c| self.column_max(c)).collect();
        CountTable {
            dim: self.dim,
            rows,
            weights,
            maxima,
        }
    }
}

/// Distinct observations of a [`CountMatrix`] with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    dim: usize,
    rows: Vec<u32>,
    weights: Vec<f64>,
    maxima: Vec<u32>,
}

impl CountTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maxima(&self) -> &[u32] {
        &self.maxima
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.rows
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// Distinct `(x_a, x_b)` pairs with multiplicities.
    pub fn pair_counts(&self, a: usize, b: usize) -> Vec<((u32, u32), f64)> {
        let mut counts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (row, w) in self.iter() {
            *counts.entry((row[a], row[b])).or_default() += w;
        }
        counts.into_iter().collect()
    }
}

/// Cost limits for exact enumeration.
///
/// The latent sum has `O(Π_i x_i^{i})` terms before pruning, so both the
/// dimension and the largest coordinate are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_dim: usize,
    pub max_count: i64,
    /// Largest number of cells a tabulated evaluator may allocate.
    pub max_cells: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_dim: 5,
            max_count: 60,
            max_cells: 50_000_000,
        }
    }
}

impl EnumerationLimits {
    fn check(&self, d: usize, x: &[i64]) -> Result<()> {
        if d > self.max_dim {
            return Err(Error::TooExpensive(format!(
                "dimension {d} exceeds the exact-evaluation limit {}",
                self.max_dim
            )));
        }
        if let Some(&m) = x.iter().max() {
            if m > self.max_count {
                return Err(Error::TooExpensive(format!(
                    "count {m} exceeds the exact-evaluation limit {}",
                    self.max_count
                )));
            }
        }
        Ok(())
    }
}

fn check_point(x: &[i64], params: &ModelParams) -> Result<()> {
    if x.len() != params.dim() {
        return Err(Error::domain(format!(
            "observation has {} coordinates, model has {}",
            x.len(),
            params.dim()
        )));
    }
    Ok(())
}

/// Cdf tables `G_{ω_{ij} λ_i}(0..=bound_i)` indexed `[i][j]`.
fn shock_tables(params: &ModelParams, bounds: &[usize]) -> Vec<Vec<CdfTable>> {
    (0..params.dim())
        .map(|i| {
            (0..=i)
                .map(|j| CdfTable::up_to(params.shock_rate(i, j), bounds[i]))
                .collect()
        })
        .collect()
}

/// What the first shock contributes once the later shocks are fixed.
#[derive(Clone, Copy, PartialEq, Eq)]
enum FirstShock {
    /// Comonotonic pmf at the residuals: gives `P(X = x)`.
    Mass,
    /// Comonotonic cdf at the residuals: gives `P(X <= x)`.
    Cdf,
}

/// Direct sum over latent shock configurations.
///
/// Columns `d-1, ..., 1` are assigned by recursion; within a column, rows are
/// assigned top-down while the comonotonic interval `(max G(z-1), min G(z)]`
/// stays nonempty. Column 0 takes the residuals `x_i - Σ_{j>0} z_{ij}`.
struct LatentEnumeration<'a> {
    tables: &'a [Vec<CdfTable>],
    d: usize,
    first: FirstShock,
    remaining: Vec<i64>,
}

impl LatentEnumeration<'_> {
    fn column(&mut self, col: usize, acc: f64) -> f64 {
        if col == 0 {
            return acc * self.first_shock();
        }
        self.row(col, col, acc, 0.0, f64::INFINITY)
    }

    fn row(&mut self, col: usize, row: usize, acc: f64, lo: f64, hi: f64) -> f64 {
        if row == self.d {
            let mass = hi - lo;
            if mass <= 0.0 {
                return 0.0;
            }
            let next = acc * mass;
            if next < PRUNE_BELOW {
                return 0.0;
            }
            return self.column(col - 1, next);
        }
        let table = &self.tables[row][col];
        let mut total = 0.0;
        let budget = self.remaining[row];
        for z in 0..=budget {
            let g_hi = table.get(z);
            let g_lo = table.get(z - 1);
            let new_lo = lo.max(g_lo);
            let new_hi = hi.min(g_hi);
            if g_lo >= hi {
                // cdf only grows with z: no later z can intersect either
                break;
            }
            if new_hi <= new_lo {
                continue;
            }
            self.remaining[row] -= z;
            total += self.row(col, row + 1, acc, new_lo, new_hi);
            self.remaining[row] += z;
        }
        total
    }

    fn first_shock(&self) -> f64 {
        match self.first {
            FirstShock::Mass => {
                let refs: Vec<&CdfTable> = self.tables.iter().map(|t| &t[0]).collect();
                comono_mass(&refs, &self.remaining)
            }
            FirstShock::Cdf => self
                .tables
                .iter()
                .zip(&self.remaining)
                .map(|(t, &r)| t[0].get(r))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn enumerate(x: &[i64], params: &ModelParams, first: FirstShock, limits: &EnumerationLimits) -> Result<f64> {
    check_point(x, params)?;
    if x.iter().any(|&v| v < 0) {
        return Ok(0.0);
    }
    limits.check(params.dim(), x)?;
    let bounds: Vec<usize> = x.iter().map(|&v| v as usize).collect();
    let tables = shock_tables(params, &bounds);
    let mut e = LatentEnumeration {
        tables: &tables,
        d: params.dim(),
        first,
        remaining: x.to_vec(),
    };
    Ok(e.column(params.dim() - 1, 1.0).min(1.0))
}

/// `P(X = x)` by enumeration of the latent shock configurations.
pub fn joint_pmf(x: &[i64], params: &ModelParams) -> Result<f64> {
    joint_pmf_with(x, params, &EnumerationLimits::default())
}

pub fn joint_pmf_with(x: &[i64], params: &ModelParams, limits: &EnumerationLimits) -> Result<f64> {
    enumerate(x, params, FirstShock::Mass, limits)
}

/// `P(X <= x)` by enumeration of the latent shock configurations.
pub fn joint_cdf(x: &[i64], params: &ModelParams) -> Result<f64> {
    joint_cdf_with(x, params, &EnumerationLimits::default())
}

pub fn joint_cdf_with(x: &[i64], params: &ModelParams, limits: &EnumerationLimits) -> Result<f64> {
    enumerate(x, params, FirstShock::Cdf, limits)
}

fn check_pair(i: usize, j: usize, d: usize) -> Result<()> {
    if i >= j {
        return Err(Error::domain(format!("pair ({i}, {j}) must satisfy i < j")));
    }
    if j >= d {
        return Err(Error::domain(format!("index {j} out of range for dimension {d}")));
    }
    Ok(())
}

/// Rate of the part of `X_j` not shared with `X_i`: `(1 - Σ_{k<=i} ω_{jk}) λ_j`.
fn pair_remainder_rate(params: &ModelParams, i: usize, j: usize) -> PoissonRate {
    let shared: f64 = (0..=i).map(|k| params.weight(j, k)).sum();
    PoissonRate::from_residual((1.0 - shared) * params.lambda(j))
}

/// `P(X_i = xi, X_j = xj)` for `i < j` (0-based) by latent enumeration.
///
/// Only the shocks `0..=i` are shared by the pair; the rest of `X_j` is an
/// independent Poisson remainder.
pub fn bivariate_pmf(i: usize, j: usize, xi: i64, xj: i64, params: &ModelParams) -> Result<f64> {
    check_pair(i, j, params.dim())?;
    if xi < 0 || xj < 0 {
        return Ok(0.0);
    }
    EnumerationLimits::default().check(2, &[xi, xj])?;
    let ti: Vec<CdfTable> = (0..=i)
        .map(|k| CdfTable::up_to(params.shock_rate(i, k), xi as usize))
        .collect();
    let tj: Vec<CdfTable> = (0..=i)
        .map(|k| CdfTable::up_to(params.shock_rate(j, k), xj as usize))
        .collect();
    let rest = CdfTable::up_to(pair_remainder_rate(params, i, j), xj as usize);
    Ok(pair_shock(i, xi, xj, 1.0, &ti, &tj, &rest).min(1.0))
}

/// Recursion over shared shocks `k, k-1, ..., 0`; `ri`, `rj` are what is left of `xi`, `xj`.
fn pair_shock(k: usize, ri: i64, rj: i64, acc: f64, ti: &[CdfTable], tj: &[CdfTable], rest: &CdfTable) -> f64 {
    let mut total = 0.0;
    let (lo_zi, hi_zi) = if k == 0 { (ri, ri) } else { (0, ri) };
    for zi in lo_zi..=hi_zi {
        let (gi_hi, gi_lo) = (ti[k].get(zi), ti[k].get(zi - 1));
        for zj in 0..=rj {
            let (gj_hi, gj_lo) = (tj[k].get(zj), tj[k].get(zj - 1));
            if gj_lo >= gi_hi {
                break;
            }
            let mass = gi_hi.min(gj_hi) - gi_lo.max(gj_lo);
            if mass <= 0.0 {
                continue;
            }
            let next = acc * mass;
            if next < PRUNE_BELOW {
                continue;
            }
            total += if k == 0 {
                let left = rj - zj;
                next * (rest.get(left) - rest.get(left - 1))
            } else {
                pair_shock(k - 1, ri - zi, rj - zj, next, ti, tj, rest)
            };
        }
    }
    total
}

/// Row-major dense array over a box `Π [0, bounds[k]]`.
#[derive(Debug, Clone)]
struct BoxTable {
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl BoxTable {
    fn zeros(bounds: &[u32]) -> Self {
        let mut strides = vec![1usize; bounds.len()];
        for k in (0..bounds.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (bounds[k + 1] as usize + 1);
        }
        let size = bounds.iter().map(|&b| b as usize + 1).product();
        BoxTable {
            strides,
            values: vec![0.0; size],
        }
    }

    #[inline]
    fn offset(&self, z: &[u32]) -> usize {
        z.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }
}

fn cells(bounds: &[u32]) -> usize {
    bounds.iter().map(|&b| b as usize + 1).product()
}

/// Chain of shock `s` over coordinates `s..d`, grouped by its first coordinate.
struct GroupedChain {
    chain: ComonotonicChain,
    /// `starts[v]..starts[v+1]` are the chain points whose first coordinate is `v`.
    starts: Vec<usize>,
}

impl GroupedChain {
    fn new(params: &ModelParams, s: usize, bounds: &[u32]) -> Self {
        let tables: Vec<CdfTable> = (s..params.dim())
            .map(|i| CdfTable::up_to(params.shock_rate(i, s), bounds[i] as usize))
            .collect();
        let refs: Vec<&CdfTable> = tables.iter().collect();
        let chain = ComonotonicChain::within(&refs, &bounds[s..]);
        let first_max = bounds[s] as usize;
        let mut starts = vec![chain.len(); first_max + 2];
        for idx in (0..chain.len()).rev() {
            starts[chain.point(idx)[0] as usize] = idx;
        }
        for v in (0..=first_max).rev() {
            starts[v] = starts[v].min(starts[v + 1]);
        }
        GroupedChain { chain, starts }
    }

    fn segment(&self, first: u32) -> std::ops::Range<usize> {
        let v = first as usize;
        self.starts[v]..self.starts[v + 1]
    }
}

/// Exact joint pmf tabulated for every point of a box.
///
/// Writing `X^{(s)}` for the sub-model generated by shocks `s..d` on
/// coordinates `s..d`, `X^{(s)} = Z_s + (0, X^{(s+1)})`, so its pmf is a sum
/// over the comonotonic support of `Z_s` of the pmf of `X^{(s+1)}`. The
/// tables for `s >= 1` are built once; shock 0 is summed per query.
pub struct JointPmfEvaluator {
    d: usize,
    bounds: Vec<u32>,
    first: GroupedChain,
    tail: Option<BoxTable>,
}

impl JointPmfEvaluator {
    pub fn new(params: &ModelParams, bounds: &[u32]) -> Result<Self> {
        Self::with_limits(params, bounds, &EnumerationLimits::default())
    }

    pub fn with_limits(params: &ModelParams, bounds: &[u32], limits: &EnumerationLimits) -> Result<Self> {
        let d = params.dim();
        if bounds.len() != d {
            return Err(Error::domain(format!(
                "bounds have {} coordinates, model has {d}",
                bounds.len()
            )));
        }
        let as_i64: Vec<i64> = bounds.iter().map(|&b| b as i64).collect();
        limits.check(d, &as_i64)?;
        if d > 1 && cells(&bounds[1..]) > limits.max_cells {
            return Err(Error::TooExpensive(format!(
                "tabulating {} cells exceeds the limit {}",
                cells(&bounds[1..]),
                limits.max_cells
            )));
        }

        let mut tail: Option<BoxTable> = None;
        for s in (1..d).rev() {
            let sub_bounds = &bounds[s..];
            let chain = GroupedChain::new(params, s, bounds);
            let mut table = BoxTable::zeros(sub_bounds);
            let mut y = vec![0u32; sub_bounds.len()];
            for cell in 0..table.values.len() {
                let mut acc = 0.0;
                for idx in chain.segment(y[0]) {
                    let z = chain.chain.point(idx);
                    let m = chain.chain.mass(idx);
                    match &tail {
                        None => acc += m,
                        Some(next) => {
                            if z[1..].iter().zip(&y[1..]).all(|(a, b)| a <= b) {
                                let off = next.offset(&y[1..]) - next.offset(&z[1..]);
                                acc += m * next.values[off];
                            }
                        }
                    }
                }
                table.values[cell] = acc;
                advance(&mut y, sub_bounds);
            }
            tail = Some(table);
        }
        Ok(JointPmfEvaluator {
            d,
            bounds: bounds.to_vec(),
            first: GroupedChain::new(params, 0, bounds),
            tail,
        })
    }

    pub fn bounds(&self) -> &[u32] {
        &self.bounds
    }

    /// `P(X = x)` for `x` inside the box.
    pub fn pmf(&self, x: &[u32]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        debug_assert!(x.iter().zip(&self.bounds).all(|(a, b)| a <= b));
        let mut acc = 0.0;
        for idx in self.first.segment(x[0]) {
            let z = self.first.chain.point(idx);
            let m = self.first.chain.mass(idx);
            match &self.tail {
                None => acc += m,
                Some(t) => {
                    if z[1..].iter().zip(&x[1..]).all(|(a, b)| a <= b) {
                        acc += m * t.values[t.offset(&x[1..]) - t.offset(&z[1..])];
                    }
                }
            }
        }
        acc.min(1.0)
    }
}

/// Odometer increment of a multi-index over a box (last coordinate fastest).
fn advance(y: &mut [u32], bounds: &[u32]) {
    for k in (0..y.len()).rev() {
        if y[k] < bounds[k] {
            y[k] += 1;
            return;
        }
        y[k] = 0;
    }
}

/// Exact pmf of the pair `(X_i, X_j)` over `[0, bi] × [0, bj]`.
#[derive(Debug, Clone)]
pub struct BivariatePmfGrid {
    bi: u32,
    bj: u32,
    values: Vec<f64>,
}

impl BivariatePmfGrid {
    pub fn new(params: &ModelParams, i: usize, j: usize, bi: u32, bj: u32) -> Result<Self> {
        check_pair(i, j, params.dim())?;
        let shares_i: Vec<f64> = (0..=i).map(|k| params.weight(i, k)).collect();
        let shares_j: Vec<f64> = (0..=i).map(|k| params.weight(j, k)).collect();
        Self::from_shares(params.lambda(i), params.lambda(j), &shares_i, &shares_j, bi, bj)
    }

    /// Grid for a pair sharing `shares_i.len()` shocks, where `shares_i` are
    /// all weights of `X_i` and `shares_j` the weights of `X_j` on those same
    /// shocks; the rest of `λ_j` is an independent remainder.
    ///
    /// If `shares_j` sums to more than one the remainder rate is negative and
    /// every cell is zero.
    pub fn from_shares(
        lambda_i: f64,
        lambda_j: f64,
        shares_i: &[f64],
        shares_j: &[f64],
        bi: u32,
        bj: u32,
    ) -> Result<Self> {
        if shares_i.is_empty() || shares_i.len() != shares_j.len() {
            return Err(Error::domain("pair shares must be nonempty and of equal length"));
        }
        let (ni, nj) = (bi as usize + 1, bj as usize + 1);
        let mut grid = vec![0.0; ni * nj];
        let remainder = 1.0 - shares_j.iter().sum::<f64>();
        if remainder < -ROW_SUM_TOL {
            return Ok(BivariatePmfGrid { bi, bj, values: grid });
        }
        let rate = |w: f64, l: f64| PoissonRate::new((w * l).max(0.0));
        let rest = CdfTable::up_to(PoissonRate::from_residual(remainder * lambda_j), bj as usize);
        for b in 0..nj {
            grid[b] = rest.get(b as i64) - rest.get(b as i64 - 1);
        }
        let mut next = vec![0.0; ni * nj];
        for (&wi, &wj) in shares_i.iter().zip(shares_j) {
            let tables = [
                CdfTable::up_to(rate(wi, lambda_i)?, bi as usize),
                CdfTable::up_to(rate(wj, lambda_j)?, bj as usize),
            ];
            let refs = [&tables[0], &tables[1]];
            let chain = ComonotonicChain::within(&refs, &[bi, bj]);
            next.iter_mut().for_each(|v| *v = 0.0);
            for (z, m) in chain.iter() {
                let (za, zb) = (z[0] as usize, z[1] as usize);
                for a in za..ni {
                    let src = (a - za) * nj;
                    let dst = a * nj;
                    for b in zb..nj {
                        next[dst + b] += m * grid[src + b - zb];
                    }
                }
            }
            std::mem::swap(&mut grid, &mut next);
        }
        Ok(BivariatePmfGrid { bi, bj, values: grid })
    }

    #[inline]
    pub fn pmf(&self, xi: u32, xj: u32) -> f64 {
        debug_assert!(xi <= self.bi && xj <= self.bj);
        self.values[xi as usize * (self.bj as usize + 1) + xj as usize].min(1.0)
    }
}

#[inline]
fn ln_or_sentinel(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        LOG_ZERO_SENTINEL
    }
}

/// `Σ_m log f(x_m)`; each zero-probability row contributes [`LOG_ZERO_SENTINEL`].
pub fn log_likelihood(data: &CountMatrix, params: &ModelParams) -> Result<f64> {
    log_likelihood_table(&data.tabulate(), params)
}

/// As [`log_likelihood`], on pre-tabulated distinct rows.
pub fn log_likelihood_table(table: &CountTable, params: &ModelParams) -> Result<f64> {
    if table.dim() != params.dim() {
        return Err(Error::domain(format!(
            "data has {} columns, model has {}",
            table.dim(),
            params.dim()
        )));
    }
    let eval = JointPmfEvaluator::new(params, table.maxima())?;
    Ok(table.iter().map(|(row, w)| w * ln_or_sentinel(eval.pmf(row))).sum())
}

/// `Σ_m log f_{i,j}(x_{mi}, x_{mj})` for the pair `i < j`.
pub fn pairwise_log_likelihood(data: &CountMatrix, i: usize, j: usize, params: &ModelParams) -> Result<f64> {
    pairwise_log_likelihood_table(&data.tabulate(), i, j, params)
}

pub fn pairwise_log_likelihood_table(table: &CountTable, i: usize, j: usize, params: &ModelParams) -> Result<f64> {
    if table.dim() != params.dim() {
        return Err(Error::domain(format!(
            "data has {} columns, model has {}",
            table.dim(),
            params.dim()
        )));
    }
    check_pair(i, j, params.dim())?;
    let grid = BivariatePmfGrid::new(params, i, j, table.maxima()[i], table.maxima()[j])?;
    Ok(table
        .pair_counts(i, j)
        .into_iter()
        .map(|((a, b), w)| w * ln_or_sentinel(grid.pmf(a, b)))
        .sum())
}

/// Draws `n` observations: per row, `d` iid uniforms `U_j` and `X_i = Σ_j G⁻¹_{ω_{ij}λ_i}(U_j)`.
pub fn sample<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<CountMatrix> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let d = params.dim();
    let tables: Vec<Vec<CdfTable>> = (0..d)
        .map(|i| {
            (0..=i)
                .map(|j| CdfTable::until_mass(params.shock_rate(i, j), QUANTILE_UPPER_MASS))
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n * d);
    let mut u = vec![0.0f64; d];
    for _ in 0..n {
        u.iter_mut().for_each(|v| *v = rng.gen::<f64>());
        for row in &tables {
            let x: u64 = row.iter().zip(&u).map(|(t, &uj)| t.quantile(uj)).sum();
            values.push(u32::try_from(x).expect("count exceeds u32"));
        }
    }
    CountMatrix::new(d, values)
}
