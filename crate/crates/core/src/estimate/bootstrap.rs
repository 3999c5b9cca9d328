//! Nonparametric bootstrap over observation rows.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CountMatrix, ModelParams};
use crate::moments::cor_matrix;
use crate::streams::stream_rng;

use super::{fit, Method};

/// Largest tolerated fraction of failed or non-converged replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Requested replicates.
    pub b: usize,
    /// Replicates dropped because the fit failed or did not converge.
    pub failures: usize,
    /// Quantity labels, see [`quantity_names`].
    pub names: Vec<String>,
    /// Quantities at the fit on the original data.
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// One row per retained replicate, in replicate order.
    pub replicates: Vec<Vec<f64>>,
}

/// Labels of the summarized quantities: rates, off-diagonal weights (row
/// major) and pairwise correlations, all 1-based.
pub fn quantity_names(d: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=d).map(|i| format!("lambda[{i}]")).collect();
    for i in 1..d {
        for j in 0..i {
            names.push(format!("omega[{}][{}]", i + 1, j + 1));
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            names.push(format!("rho[{}][{}]", i + 1, j + 1));
        }
    }
    names
}

/// Quantities in the order of [`quantity_names`].
pub fn quantities(params: &ModelParams) -> Vec<f64> {
    let d = params.dim();
    let mut q = params.lambdas().to_vec();
    q.extend(params.off_diagonal());
    let cor = cor_matrix(params);
    for i in 0..d {
        for j in i + 1..d {
            q.push(cor[i][j]);
        }
    }
    q
}

/// Refits `method` on `b` resamples of the rows of `data`.
///
/// Replicate `r` draws its rows from `stream_rng(seed, r)`, so results are
/// independent of thread scheduling.
pub fn bootstrap(data: &CountMatrix, method: Method, b: usize, seed: u64) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::domain(format!("bootstrap needs at least 2 replicates, got {b}")));
    }
    let point = fit(data, method)?;
    let n = data.n_rows();
    let outcomes: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            match fit(&data.select(&idx), method) {
                Ok(f) if f.converged => Some(quantities(&f.params)),
                _ => None,
            }
        })
        .collect();
    let replicates: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
    let failures = b - replicates.len();
    if failures as f64 > MAX_FAILURE_FRACTION * b as f64 || replicates.len() < 2 {
        return Err(Error::Diagnostic(format!(
            "{failures} of {b} bootstrap replicates failed or did not converge"
        )));
    }
    let (se, ci_lo, ci_hi) = summarize(&replicates);
    Ok(BootstrapResult {
        b,
        failures,
        names: quantity_names(data.dim()),
        estimate: quantities(&point.params),
        se,
        ci_lo,
        ci_hi,
        replicates,
    })
}

/// Per-column sample SD and 2.5% / 97.5% percentiles.
fn summarize(replicates: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = replicates[0].len();
    let mut se = Vec::with_capacity(p);
    let mut lo = Vec::with_capacity(p);
    let mut hi = Vec::with_capacity(p);
    for c in 0..p {
        let mut col: Vec<f64> = replicates.iter().map(|r| r[c]).collect();
        let m = col.len() as f64;
        let mean = col.iter().sum::<f64>() / m;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        se.push(var.sqrt());
        col.sort_by(f64::total_cmp);
        lo.push(percentile(&col, 0.025));
        hi.push(percentile(&col, 0.975));
    }
    (se, lo, hi)
}

/// Linear-interpolation percentile of sorted values (the usual "type 7").
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
