//! Chi-squared goodness of fit of a count column to a Poisson law.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::pois::{pois_pmf, PoissonRate};

const MIN_EXPECTED: f64 = 5.0;
const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    /// Half-open count ranges `[lo, hi)` of the cells; the last is `[lo, ∞)`.
    pub bins: Vec<(u32, Option<u32>)>,
}

/// Pearson test of `column` against Poisson(mean).
///
/// Cells are grown from zero until each expects at least five counts; the
/// upper tail is one open cell, merged into its neighbour when it expects
/// fewer than five. One degree of freedom is spent on the estimated mean.
pub fn poisson_gof(column: &[u32]) -> Result<GofResult> {
    let n = column.len();
    if n < MIN_ROWS {
        return Err(Error::domain(format!("goodness of fit needs at least {MIN_ROWS} values, got {n}")));
    }
    let mean = column.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let rate = PoissonRate::new(mean)?;
    let nf = n as f64;

    // closed cells [lo, hi) with their expected counts
    let mut cells: Vec<(u32, u32, f64)> = Vec::new();
    let mut lo = 0u32;
    let mut acc = 0.0;
    let mut used = 0.0;
    let mut k = 0u32;
    loop {
        acc += nf * pois_pmf(i64::from(k), rate)?;
        k += 1;
        if acc >= MIN_EXPECTED {
            cells.push((lo, k, acc));
            used += acc;
            lo = k;
            acc = 0.0;
            if nf - used < MIN_EXPECTED {
                break;
            }
        }
        if nf - used - acc < MIN_EXPECTED {
            break;
        }
    }
    // open tail [lo, ∞)
    let tail = (nf - used).max(0.0);
    let mut bins: Vec<(u32, Option<u32>, f64)> = cells.into_iter().map(|(a, b, e)| (a, Some(b), e)).collect();
    if tail >= MIN_EXPECTED || bins.is_empty() {
        bins.push((lo, None, tail));
    } else {
        let last = bins.last_mut().expect("nonempty");
        last.1 = None;
        last.2 += tail;
    }
    if bins.len() < 3 {
        return Err(Error::Diagnostic(format!(
            "only {} cells with expected count >= {MIN_EXPECTED}; need 3",
            bins.len()
        )));
    }

    let mut observed = vec![0.0; bins.len()];
    for &v in column {
        let idx = bins.iter().position(|&(a, b, _)| v >= a && b.map_or(true, |b| v < b));
        observed[idx.expect("cells cover all counts")] += 1.0;
    }
    let statistic: f64 = bins
        .iter()
        .zip(&observed)
        .map(|(&(_, _, e), o)| (o - e).powi(2) / e)
        .sum();
    let dof = bins.len() - 2;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Diagnostic(e.to_string()))?;
    Ok(GofResult {
        statistic,
        p_value: chi.sf(statistic),
        dof,
        bins: bins.into_iter().map(|(a, b, _)| (a, b)).collect(),
    })
}
