//! Sequential pairwise-likelihood estimation.

use crate::error::Result;
use crate::model::{log_likelihood_table, BivariatePmfGrid, CountMatrix, ModelParams, LOG_ZERO_SENTINEL};

use super::{check_data, close_row, FitResult, Method};

/// Points of the seeding grid for each 1-D search.
pub const SQ_GRID_POINTS: usize = 21;
const GOLDEN_TOL: f64 = 1e-8;

/// Pairwise log-likelihood of components `(k, j)` as a function of `ω_jk`,
/// all earlier weights held fixed.
struct PairObjective {
    lambda_k: f64,
    lambda_j: f64,
    shares_k: Vec<f64>,
    shares_j: Vec<f64>,
    counts: Vec<((u32, u32), f64)>,
    bk: u32,
    bj: u32,
}

impl PairObjective {
    fn eval(&mut self, w: f64) -> f64 {
        *self.shares_j.last_mut().expect("at least one shock") = w;
        let grid = match BivariatePmfGrid::from_shares(
            self.lambda_k,
            self.lambda_j,
            &self.shares_k,
            &self.shares_j,
            self.bk,
            self.bj,
        ) {
            Ok(g) => g,
            Err(_) => return f64::NEG_INFINITY,
        };
        self.counts
            .iter()
            .map(|&((a, b), n)| {
                let p = grid.pmf(a, b);
                n * if p > 0.0 { p.ln() } else { LOG_ZERO_SENTINEL }
            })
            .sum()
    }
}

/// Maximizes `f` on `[0, hi]`: best point of an evenly spaced grid, then
/// golden-section search between its neighbours.
fn grid_then_golden(mut f: impl FnMut(f64) -> f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    let step = hi / (SQ_GRID_POINTS - 1) as f64;
    let values: Vec<f64> = (0..SQ_GRID_POINTS).map(|g| f(g as f64 * step)).collect();
    let best = (0..SQ_GRID_POINTS)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .expect("grid is nonempty");
    let (mut a, mut b) = (
        best.saturating_sub(1) as f64 * step,
        ((best + 1).min(SQ_GRID_POINTS - 1) as f64 * step).min(hi),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > GOLDEN_TOL {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let mid = 0.5 * (a + b);
    let (grid_x, grid_f) = (best as f64 * step, values[best]);
    if f(mid) >= grid_f {
        mid
    } else {
        grid_x
    }
}

/// Sequential pairwise-likelihood estimator.
///
/// Rates are the column means. For shock `k` and each `j > k`, `ω_jk`
/// maximizes the pairwise log-likelihood of `(X_k, X_j)` over
/// `[0, 1 − Σ_{l<k} ω_jl]` with all earlier estimates frozen.
pub fn fit_sq(data: &CountMatrix) -> Result<FitResult> {
    let means = check_data(data, 2)?;
    let d = data.dim();
    let table = data.tabulate();
    let mut lower: Vec<Vec<f64>> = (0..d).map(|_| Vec::new()).collect();
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    let mut warnings = Vec::new();

    for k in 0..d.saturating_sub(1) {
        if k > 0 {
            let (row, renormalized) = close_row(&lower[k]);
            if renormalized {
                warnings.push(format!("row {} weights exceeded 1 and were rescaled", k + 1));
            }
            rows.push(row);
        }
        for j in k + 1..d {
            let budget = (1.0 - lower[j].iter().sum::<f64>()).clamp(0.0, 1.0);
            let mut shares_j = lower[j].clone();
            shares_j.push(0.0);
            let mut obj = PairObjective {
                lambda_k: means[k],
                lambda_j: means[j],
                shares_k: rows[k].clone(),
                shares_j,
                counts: table.pair_counts(k, j),
                bk: table.maxima()[k],
                bj: table.maxima()[j],
            };
            let w = grid_then_golden(|w| obj.eval(w), budget);
            lower[j].push(w);
        }
    }
    if d > 1 {
        let (row, renormalized) = close_row(&lower[d - 1]);
        if renormalized {
            warnings.push(format!("row {d} weights exceeded 1 and were rescaled"));
        }
        rows.push(row);
    }
    let params = ModelParams::new(means, rows)?;
    let loglik = log_likelihood_table(&table, &params).ok();
    Ok(FitResult {
        params,
        method: Method::Sq,
        loglik,
        converged: true,
        iterations: 0,
        capped_indices: Vec::new(),
        warnings,
    })
}
