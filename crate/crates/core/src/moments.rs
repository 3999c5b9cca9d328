//! Covariance structure implied by the model.
//!
//! The covariance of a comonotonic Poisson pair with means `a` and `b` is
//! `m(a, b) = Σ_{m>=0} Σ_{n>=0} min{Ḡ_a(m), Ḡ_b(n)} - ab`, the largest
//! covariance any pair with those margins can have. Every pairwise covariance
//! of the model is a sum of such terms over the shocks the pair shares, and
//! `m` is nondecreasing in either rate, which is what makes the sequential
//! method of moments a sequence of one-dimensional monotone root finds.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pois::{ln_factorial, PoissonRate};

/// Survival values below this are treated as zero when truncating the series.
const SURVIVAL_FLOOR: f64 = 1e-17;

/// Bisection stops once `|m(ω) - target|` is below this...
pub const SOLVE_FTOL: f64 = 1e-10;
/// ...or the bracket is narrower than this.
pub const SOLVE_XTOL: f64 = 1e-8;

/// Survival function `Ḡ(0), Ḡ(1), ..., Ḡ(M)` accumulated from the far tail,
/// truncated where it drops below [`SURVIVAL_FLOOR`].
fn survival_array(rate: f64) -> Vec<f64> {
    debug_assert!(rate > 0.0);
    let ln_rate = rate.ln();
    let horizon = (rate + 12.0 * rate.sqrt() + 40.0).ceil() as u64;
    let pmf: Vec<f64> = (0..=horizon)
        .map(|k| (-rate + k as f64 * ln_rate - ln_factorial(k)).exp())
        .collect();
    let mut surv = vec![0.0; pmf.len()];
    let mut tail = 0.0;
    for k in (0..pmf.len()).rev() {
        surv[k] = tail;
        tail += pmf[k];
    }
    let keep = surv.iter().position(|&s| s < SURVIVAL_FLOOR).unwrap_or(surv.len());
    surv.truncate(keep.max(1));
    surv
}

/// Covariance of the comonotonic pair `(G⁻¹_a(U), G⁻¹_b(U))`.
///
/// The general `m_{λi,λj}(ω_ik, ω_jk)` is `max_cov(ω_ik λ_i, ω_jk λ_j)`.
/// Both sums run until the survival functions fall below `1e-17`; since
/// `Ḡ_b` is nonincreasing, for each `m` the terms with `Ḡ_b(n) >= Ḡ_a(m)`
/// form a prefix, so the double sum is a single merge of the two arrays.
pub fn max_cov(a: PoissonRate, b: PoissonRate) -> f64 {
    let (a, b) = (a.value(), b.value());
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let sa = survival_array(a);
    let sb = survival_array(b);
    // suffix[c] = Σ_{n >= c} Ḡ_b(n)
    let mut suffix = vec![0.0; sb.len() + 1];
    for n in (0..sb.len()).rev() {
        suffix[n] = suffix[n + 1] + sb[n];
    }
    let mut total = 0.0;
    let mut crossing = 0usize;
    for &s in &sa {
        while crossing < sb.len() && sb[crossing] >= s {
            crossing += 1;
        }
        total += crossing as f64 * s + suffix[crossing];
    }
    total - a * b
}

fn check_pair(i: usize, j: usize, d: usize) -> Result<()> {
    if i >= j || j >= d {
        return Err(Error::domain(format!(
            "pair ({i}, {j}) must satisfy i < j < {d}"
        )));
    }
    Ok(())
}

/// `cov(X_i, X_j) = Σ_{k<=i} m(ω_ik λ_i, ω_jk λ_j)` for `i < j`.
pub fn pair_cov(i: usize, j: usize, params: &ModelParams) -> Result<f64> {
    check_pair(i, j, params.dim())?;
    Ok((0..=i)
        .map(|k| max_cov(params.shock_rate(i, k), params.shock_rate(j, k)))
        .sum())
}

/// Implied covariance matrix; the diagonal holds the Poisson variances `λ_i`.
pub fn cov_matrix(params: &ModelParams) -> Vec<Vec<f64>> {
    let d = params.dim();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        cov[i][i] = params.lambda(i);
        for j in i + 1..d {
            let c = pair_cov(i, j, params).expect("indices are in range");
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    cov
}

/// Implied correlation matrix, `cov(X)` scaled elementwise by `1/√(λ_i λ_j)`.
pub fn cor_matrix(params: &ModelParams) -> Vec<Vec<f64>> {
    let cov = cov_matrix(params);
    let l = params.lambdas();
    cov.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &c)| if i == j { 1.0 } else { c / (l[i] * l[j]).sqrt() })
                .collect()
        })
        .collect()
}

/// One moment-matching equation of the sequential method of moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCovTarget {
    pub i: usize,
    pub j: usize,
    /// Covariance left to explain by shock `i` (sample covariance minus the
    /// contributions of earlier shocks).
    pub sample_cov: f64,
    /// Share of `λ_i` still carried by shock `i`: `1 - Σ_{l<i} ω_il`.
    pub residual_weight_i: f64,
}

/// Which end of `[0, 1]` a solution was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSolution {
    pub weight: f64,
    /// Set when the target fell outside `[m(·, 0), m(·, 1)]`.
    pub cap: Option<Cap>,
    /// Set when a positive target met a shock with no weight left on `X_i`.
    pub no_budget: bool,
}

/// Solves `max_cov(r λ_i, ω λ_j) = target` for `ω ∈ [0, 1]` by bisection.
///
/// Negative targets give `0`, targets beyond the `ω = 1` covariance give `1`.
pub fn solve_weight(target: &PairCovTarget, lambda_i: PoissonRate, lambda_j: PoissonRate) -> Result<WeightSolution> {
    if target.i >= target.j {
        return Err(Error::domain(format!(
            "pair ({}, {}) must satisfy i < j",
            target.i, target.j
        )));
    }
    let r = target.residual_weight_i;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("residual weight must be in [0, 1], got {r}")));
    }
    if !target.sample_cov.is_finite() {
        return Err(Error::domain("target covariance must be finite"));
    }
    if lambda_i.value() <= 0.0 || lambda_j.value() <= 0.0 {
        return Err(Error::domain("marginal rates must be > 0"));
    }
    let s = target.sample_cov;
    let capped = |weight, cap| WeightSolution {
        weight,
        cap,
        no_budget: false,
    };
    if s < 0.0 {
        return Ok(capped(0.0, Some(Cap::Zero)));
    }
    if s == 0.0 {
        return Ok(capped(0.0, None));
    }
    let rate_i = PoissonRate::from_residual(r * lambda_i.value());
    if rate_i.value() == 0.0 {
        return Ok(WeightSolution {
            weight: 0.0,
            cap: None,
            no_budget: true,
        });
    }
    let f = |w: f64| max_cov(rate_i, PoissonRate::from_residual(w * lambda_j.value())) - s;
    let f_hi = f(1.0);
    if f_hi <= 0.0 {
        let cap = if f_hi < 0.0 { Some(Cap::One) } else { None };
        return Ok(capped(1.0, cap));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= SOLVE_FTOL || hi - lo <= SOLVE_XTOL {
            return Ok(capped(mid, None));
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pois::CdfTable;

    fn rate(r: f64) -> PoissonRate {
        PoissonRate::new(r).unwrap()
    }

    /// `E[G⁻¹_a(U) G⁻¹_b(U)] - ab` by sweeping U across the merged cdf breakpoints.
    fn comonotonic_cov_oracle(a: f64, b: f64) -> f64 {
        let ta = CdfTable::up_to(rate(a), 400);
        let tb = CdfTable::up_to(rate(b), 400);
        let (mut za, mut zb, mut lo) = (0usize, 0usize, 0.0f64);
        let mut e = 0.0;
        while za < 400 && zb < 400 {
            let (ga, gb) = (ta.values()[za], tb.values()[zb]);
            let hi = ga.min(gb);
            e += (hi - lo) * za as f64 * zb as f64;
            lo = hi;
            if hi >= 1.0 {
                break;
            }
            if ga == hi {
                za += 1;
            }
            if gb == hi {
                zb += 1;
            }
        }
        e - a * b
    }

    #[test]
    fn identical_margins_give_the_variance() {
        for &l in &[0.1, 1.0, 2.5, 7.0, 30.0] {
            let m = max_cov(rate(l), rate(l));
            assert!((m - l).abs() < 1e-8, "λ={l}: {m}");
        }
    }

    #[test]
    fn degenerate_rates_give_zero() {
        assert_eq!(max_cov(rate(0.0), rate(5.0)), 0.0);
        assert_eq!(max_cov(rate(5.0), rate(0.0)), 0.0);
    }

    #[test]
    fn merge_matches_breakpoint_oracle() {
        for &(a, b) in &[(1.0, 1.8), (0.3, 4.0), (4.0, 0.3), (2.0, 3.0), (6.0, 8.0), (0.05, 0.9)] {
            let m = max_cov(rate(a), rate(b));
            let o = comonotonic_cov_oracle(a, b);
            assert!((m - o).abs() < 1e-9, "({a}, {b}): {m} vs {o}");
        }
    }

    #[test]
    fn symmetric_in_its_arguments() {
        for &(a, b) in &[(1.0, 2.0), (0.4, 7.5), (3.3, 3.2)] {
            assert!((max_cov(rate(a), rate(b)) - max_cov(rate(b), rate(a))).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_1a_first_pair() {
        let v = max_cov(rate(1.0), rate(0.9 * 2.0));
        assert!((v / 2.0f64.sqrt() - 0.89).abs() <= 0.005, "{}", v / 2.0f64.sqrt());
    }

    #[test]
    fn pair_cov_examples() {
        let ind = ModelParams::independent(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pair_cov(0, 2, &ind).unwrap(), 0.0);
        let full = ModelParams::comonotonic(vec![1.5, 2.5]).unwrap();
        assert_eq!(pair_cov(0, 1, &full).unwrap(), max_cov(rate(1.5), rate(2.5)));
        let p2a = ModelParams::from_lower(vec![1.0, 2.0, 3.0], &[vec![0.25], vec![0.1, 0.6]]).unwrap();
        let r = pair_cov(1, 2, &p2a).unwrap() / 6.0f64.sqrt();
        assert!((r - 0.76).abs() <= 0.005, "{r}");
        assert!(pair_cov(1, 1, &p2a).is_err());
        assert!(pair_cov(1, 3, &p2a).is_err());
    }

    #[test]
    fn cor_matrix_is_identity_under_independence() {
        let ind = ModelParams::independent(vec![1.0, 4.0, 2.0]).unwrap();
        let c = cor_matrix(&ind);
        for (i, row) in c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn solve_weight_boundaries() {
        let t = |s: f64, r: f64| PairCovTarget {
            i: 0,
            j: 1,
            sample_cov: s,
            residual_weight_i: r,
        };
        let (li, lj) = (rate(1.0), rate(2.0));
        let zero = solve_weight(&t(0.0, 1.0), li, lj).unwrap();
        assert_eq!((zero.weight, zero.cap), (0.0, None));
        let neg = solve_weight(&t(-0.3, 1.0), li, lj).unwrap();
        assert_eq!((neg.weight, neg.cap), (0.0, Some(Cap::Zero)));
        let top = max_cov(li, lj);
        let one = solve_weight(&t(top, 1.0), li, lj).unwrap();
        assert_eq!((one.weight, one.cap), (1.0, None));
        let over = solve_weight(&t(top + 1.0, 1.0), li, lj).unwrap();
        assert_eq!((over.weight, over.cap), (1.0, Some(Cap::One)));
        let nb = solve_weight(&t(0.2, 0.0), li, lj).unwrap();
        assert!(nb.no_budget && nb.weight == 0.0);
        assert!(solve_weight(&t(0.2, 1.5), li, lj).is_err());
    }

    #[test]
    fn solve_weight_round_trip() {
        let target = max_cov(rate(1.0), rate(0.9 * 2.0));
        let sol = solve_weight(
            &PairCovTarget {
                i: 0,
                j: 1,
                sample_cov: target,
                residual_weight_i: 1.0,
            },
            rate(1.0),
            rate(2.0),
        )
        .unwrap();
        assert!((sol.weight - 0.9).abs() < 1e-6, "{}", sol.weight);
    }
}
