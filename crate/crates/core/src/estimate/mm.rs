use crate::error::{Error, Result};
use crate::model::{CountMatrix, ModelParams};
use crate::moments::{max_cov, solve_weight, PairCovTarget};
use crate::pois::PoissonRate;

use super::{check_data, close_row, FitResult, Method};

/// Sequential method of moments.
///
/// Rates are the column means. Shock `k` is then fitted by matching, for
/// every `j > k`, the sample covariance `S_kj` net of the covariance already
/// explained by shocks `0..k` to `m(ω_kk X̄_k, ω_jk X̄_j)`. Out-of-range
/// targets clamp `ω_jk` to 0 or 1 and are reported in `capped_indices`.
pub fn fit_mm(data: &CountMatrix) -> Result<FitResult> {
    let means = check_data(data, 2)?;
    let d = data.dim();
    for c in 0..d {
        if data.sample_cov(c, c) <= 0.0 {
            return Err(Error::Estimation(format!(
                "column {} has zero sample variance",
                c + 1
            )));
        }
    }
    let rate = |v: f64| PoissonRate::new(v).expect("column means are finite and positive");

    // lower[j] collects ω_j0, ..., ω_j,j-1 as shocks are processed
    let mut lower: Vec<Vec<f64>> = (0..d).map(|_| Vec::new()).collect();
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    let mut capped = Vec::new();
    let mut warnings = Vec::new();

    for k in 0..d.saturating_sub(1) {
        if k > 0 {
            let (row, renormalized) = close_row(&lower[k]);
            if renormalized {
                warnings.push(format!("row {} weights exceeded 1 and were rescaled", k + 1));
            }
            rows.push(row);
        }
        let row_k = rows[k].clone();
        let residual = row_k[k];
        for j in k + 1..d {
            let explained: f64 = (0..k)
                .map(|l| max_cov(rate(row_k[l] * means[k]), rate(lower[j][l] * means[j])))
                .sum();
            let target = PairCovTarget {
                i: k,
                j,
                sample_cov: data.sample_cov(k, j) - explained,
                residual_weight_i: residual.clamp(0.0, 1.0),
            };
            let sol = solve_weight(&target, rate(means[k]), rate(means[j]))?;
            if sol.cap.is_some() {
                capped.push((j, k));
            }
            if sol.no_budget {
                warnings.push(format!(
                    "no weight left on component {} for shock {}; omega[{}][{}] set to 0",
                    k + 1,
                    k + 1,
                    j + 1,
                    k + 1
                ));
            }
            lower[j].push(sol.weight);
        }
    }
    if d > 1 {
        let (row, renormalized) = close_row(&lower[d - 1]);
        if renormalized {
            warnings.push(format!("row {d} weights exceeded 1 and were rescaled"));
        }
        rows.push(row);
    }

    Ok(FitResult {
        params: ModelParams::new(means, rows)?,
        method: Method::Mm,
        loglik: None,
        converged: true,
        iterations: 0,
        capped_indices: capped,
        warnings,
    })
}
