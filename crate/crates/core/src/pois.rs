//! Univariate Poisson primitives and comonotonic Poisson vectors.
//!
//! Everything here is exact up to floating point: the pmf is evaluated in
//! log space, the cdf by forward summation of the pmf, and the quantile as
//! the left-continuous generalized inverse of that same running sum, so the
//! three stay mutually consistent bit for bit.

use std::sync::RwLock;

use crate::error::{Error, Result};

/// Largest mass the quantile function treats as reachable; `G⁻¹(1)` is
/// unbounded so `u = 1` is mapped to the smallest `k` with `G(k) ≥ 1 - 1e-15`.
pub const QUANTILE_UPPER_MASS: f64 = 1.0 - 1e-15;

/// Relative size below which a forward-summation increment is negligible.
const SERIES_REL_EPS: f64 = 1e-17;

/// Mean of a Poisson variable. Zero is allowed and denotes the point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PoissonRate(f64);

impl PoissonRate {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::domain(format!("Poisson rate must be finite, got {value}")));
        }
        if value < 0.0 {
            return Err(Error::domain(format!("Poisson rate must be >= 0, got {value}")));
        }
        Ok(PoissonRate(value))
    }

    /// Clamps tiny negative round-off (e.g. `(1 - Σω)λ`) to zero.
    pub(crate) fn from_residual(value: f64) -> Self {
        debug_assert!(value.is_finite());
        PoissonRate(value.max(0.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

static LN_FACTORIALS: RwLock<Vec<f64>> = RwLock::new(Vec::new());

fn ensure_ln_factorials(kmax: usize) {
    {
        let table = LN_FACTORIALS.read().expect("ln-factorial table poisoned");
        if table.len() > kmax {
            return;
        }
    }
    let mut table = LN_FACTORIALS.write().expect("ln-factorial table poisoned");
    if table.is_empty() {
        table.push(0.0);
    }
    // grow geometrically so repeated small extensions stay cheap
    let target = (kmax + 1).max(2 * table.len()).max(256);
    while table.len() < target {
        let k = table.len();
        let prev = table[k - 1];
        table.push(prev + (k as f64).ln());
    }
}

/// Runs `f` with read access to `ln 0!, ..., ln kmax!`.
fn with_ln_factorials<R>(kmax: usize, f: impl FnOnce(&[f64]) -> R) -> R {
    ensure_ln_factorials(kmax);
    let table = LN_FACTORIALS.read().expect("ln-factorial table poisoned");
    f(&table[..=kmax])
}

/// `ln k!` from the shared, lazily extended table.
pub fn ln_factorial(k: u64) -> f64 {
    with_ln_factorials(k as usize, |t| t[k as usize])
}

#[inline]
fn ln_pmf_with(k: u64, rate: f64, ln_rate: f64, ln_fact: f64) -> f64 {
    -rate + k as f64 * ln_rate - ln_fact
}

/// `g_rate(k)` for nonnegative `k`, without validation.
pub(crate) fn pmf_raw(k: u64, rate: f64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    ln_pmf_with(k, rate, rate.ln(), ln_factorial(k)).exp()
}

/// Poisson probability mass `e^{-λ} λ^k / k!`, computed in log space.
pub fn pois_pmf(k: i64, rate: PoissonRate) -> Result<f64> {
    if k < 0 {
        return Err(Error::domain(format!("pmf argument must be >= 0, got {k}")));
    }
    Ok(pmf_raw(k as u64, rate.value()))
}

/// Natural log of the Poisson pmf; `-inf` where the mass is exactly zero.
pub fn pois_ln_pmf(k: u64, rate: PoissonRate) -> f64 {
    let r = rate.value();
    if r == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_pmf_with(k, r, r.ln(), ln_factorial(k))
}

/// Running sums `G(0), G(1), ...` of the Poisson pmf.
///
/// Once past the mode and the increment drops below `1e-17` of the running
/// sum, the iterator is saturated and keeps yielding the final sum.
struct CdfSeries {
    rate: f64,
    ln_rate: f64,
    k: u64,
    sum: f64,
    saturated: bool,
}

impl CdfSeries {
    fn new(rate: f64) -> Self {
        CdfSeries {
            rate,
            ln_rate: if rate > 0.0 { rate.ln() } else { 0.0 },
            k: 0,
            sum: 0.0,
            saturated: false,
        }
    }

    /// Returns `(k, G(k))` and advances.
    fn next_with(&mut self, ln_fact: &[f64]) -> (u64, f64) {
        let k = self.k;
        if !self.saturated {
            let term = if self.rate == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                ln_pmf_with(k, self.rate, self.ln_rate, ln_fact[k as usize]).exp()
            };
            self.sum += term;
            if (k as f64) >= self.rate && term <= SERIES_REL_EPS * self.sum {
                self.saturated = true;
            }
            if self.sum > 1.0 {
                self.sum = 1.0;
            }
        }
        self.k += 1;
        (k, self.sum)
    }
}

/// Rough upper count beyond which the Poisson tail is far below 1e-17.
fn tail_horizon(rate: f64) -> usize {
    (rate + 12.0 * rate.sqrt() + 40.0).ceil() as usize
}

/// Tabulated cdf `G_rate(0..=kmax)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    rate: f64,
    values: Vec<f64>,
    saturated: bool,
}

impl CdfTable {
    /// Tabulates `G(0), ..., G(kmax)` exactly as `pois_cdf` would compute them.
    pub fn up_to(rate: PoissonRate, kmax: usize) -> Self {
        let rate = rate.value();
        let mut series = CdfSeries::new(rate);
        let values = with_ln_factorials(kmax, |lf| {
            (0..=kmax).map(|_| series.next_with(lf).1).collect::<Vec<_>>()
        });
        CdfTable {
            rate,
            values,
            saturated: series.saturated,
        }
    }

    /// Tabulates until the cdf first reaches `mass` (or the series saturates).
    pub fn until_mass(rate: PoissonRate, mass: f64) -> Self {
        let r = rate.value();
        let mut horizon = tail_horizon(r);
        let mut series = CdfSeries::new(r);
        let mut values = Vec::new();
        loop {
            let done = with_ln_factorials(horizon, |lf| {
                while (series.k as usize) <= horizon {
                    let (_, g) = series.next_with(lf);
                    values.push(g);
                    if g >= mass || series.saturated {
                        return true;
                    }
                }
                false
            });
            if done {
                break;
            }
            horizon *= 2;
        }
        CdfTable {
            rate: r,
            values,
            saturated: series.saturated,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Largest tabulated count.
    pub fn kmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `G(k)`, with `G(k) = 0` for negative `k`.
    ///
    /// Panics if `k` is beyond the table and the series was not saturated there.
    #[inline]
    pub fn get(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let k = k as usize;
        match self.values.get(k) {
            Some(&g) => g,
            None => {
                assert!(
                    self.saturated,
                    "cdf table for rate {} queried at {k} beyond kmax {}",
                    self.rate,
                    self.kmax()
                );
                *self.values.last().expect("cdf table is never empty")
            }
        }
    }

    /// Smallest tabulated `k` with `G(k) >= u`; the last index if none is.
    #[inline]
    pub fn quantile(&self, u: f64) -> u64 {
        let idx = self.values.partition_point(|&g| g < u);
        idx.min(self.values.len() - 1) as u64
    }
}

/// Poisson distribution function `G_rate(k)`; zero for negative `k`.
pub fn pois_cdf(k: i64, rate: PoissonRate) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as usize;
    let r = rate.value();
    let mut series = CdfSeries::new(r);
    let horizon = k.min(tail_horizon(r).max(16) * 4);
    with_ln_factorials(horizon, |lf| {
        let mut g = 0.0;
        while (series.k as usize) <= k {
            if series.saturated || series.k as usize > horizon {
                break;
            }
            g = series.next_with(lf).1;
        }
        g
    })
}

/// Poisson survival function `1 - G_rate(k)`.
pub fn pois_sf(k: i64, rate: PoissonRate) -> f64 {
    1.0 - pois_cdf(k, rate)
}

fn check_unit(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("probability level must be in [0, 1], got {u}")));
    }
    Ok(())
}

/// Left-continuous inverse `min{k >= 0 : G_rate(k) >= u}`.
///
/// `u = 1` is capped at [`QUANTILE_UPPER_MASS`].
pub fn pois_quantile(u: f64, rate: PoissonRate) -> Result<u64> {
    check_unit(u)?;
    if u == 0.0 || rate.value() == 0.0 {
        return Ok(0);
    }
    let target = u.min(QUANTILE_UPPER_MASS);
    let r = rate.value();
    let mut series = CdfSeries::new(r);
    let mut horizon = tail_horizon(r);
    loop {
        let found = with_ln_factorials(horizon, |lf| {
            while (series.k as usize) <= horizon {
                let (k, g) = series.next_with(lf);
                if g >= target || series.saturated {
                    return Some(k);
                }
            }
            None
        });
        if let Some(k) = found {
            return Ok(k);
        }
        horizon *= 2;
    }
}

/// Marginal rates of a comonotonic Poisson vector `(G⁻¹_{μ1}(U), ..., G⁻¹_{μm}(U))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComonotonicSpec {
    rates: Vec<PoissonRate>,
}

impl ComonotonicSpec {
    pub fn new(rates: Vec<PoissonRate>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::domain("comonotonic vector needs at least one component"));
        }
        Ok(ComonotonicSpec { rates })
    }

    pub fn from_values(rates: &[f64]) -> Result<Self> {
        let rates = rates
            .iter()
            .map(|&r| PoissonRate::new(r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rates)
    }

    pub fn rates(&self) -> &[PoissonRate] {
        &self.rates
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }
}

/// Comonotonic mass from per-component cdf tables: `[min G(z) - max G(z-1)]_+`.
#[inline]
pub(crate) fn comono_mass(tables: &[&CdfTable], z: &[i64]) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = 0.0f64;
    for (t, &zk) in tables.iter().zip(z) {
        if zk < 0 {
            return 0.0;
        }
        upper = upper.min(t.get(zk));
        lower = lower.max(t.get(zk - 1));
    }
    (upper - lower).max(0.0)
}

/// Joint pmf of the comonotonic Poisson vector described by `spec`.
pub fn comono_pmf(z: &[i64], spec: &ComonotonicSpec) -> Result<f64> {
    if z.len() != spec.dim() {
        return Err(Error::domain(format!(
            "point has {} coordinates but the comonotonic vector has {}",
            z.len(),
            spec.dim()
        )));
    }
    if z.iter().any(|&v| v < 0) {
        return Ok(0.0);
    }
    let tables: Vec<CdfTable> = spec
        .rates
        .iter()
        .zip(z)
        .map(|(&r, &zk)| CdfTable::up_to(r, zk as usize))
        .collect();
    let refs: Vec<&CdfTable> = tables.iter().collect();
    Ok(comono_mass(&refs, z))
}

/// Maps a common uniform `u` to the comonotonic vector of Poisson quantiles.
pub fn comono_sample(u: f64, spec: &ComonotonicSpec) -> Result<Vec<u64>> {
    check_unit(u)?;
    spec.rates.iter().map(|&r| pois_quantile(u, r)).collect()
}

/// Support points of a comonotonic vector lying inside a box, with their masses.
///
/// As the common uniform sweeps `(0, 1)` the vector moves along a chain that
/// increases by one in at least one coordinate per step, so the support is
/// totally ordered; points are stored in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComonotonicChain {
    dim: usize,
    coords: Vec<u32>,
    masses: Vec<f64>,
}

impl ComonotonicChain {
    /// Walks the chain for cdf tables covering at least `0..=bounds[k]`,
    /// stopping at the first point leaving the box `Π [0, bounds[k]]`.
    pub fn within(tables: &[&CdfTable], bounds: &[u32]) -> Self {
        debug_assert_eq!(tables.len(), bounds.len());
        let dim = tables.len();
        let mut z = vec![0u32; dim];
        let mut coords = Vec::new();
        let mut masses = Vec::new();
        let mut lower = 0.0f64;
        'walk: loop {
            let upper = tables
                .iter()
                .zip(&z)
                .map(|(t, &zk)| t.get(zk as i64))
                .fold(f64::INFINITY, f64::min);
            let mass = upper - lower;
            if mass > 0.0 {
                coords.extend_from_slice(&z);
                masses.push(mass);
            }
            if upper >= 1.0 {
                break;
            }
            for k in 0..dim {
                if tables[k].get(z[k] as i64) == upper {
                    z[k] += 1;
                    if z[k] > bounds[k] {
                        break 'walk;
                    }
                }
            }
            lower = upper;
        }
        ComonotonicChain { dim, coords, masses }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[u32] {
        &self.coords[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn mass(&self, idx: usize) -> f64 {
        self.masses[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim.max(1))
            .zip(self.masses.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rate(r: f64) -> PoissonRate {
        PoissonRate::new(r).unwrap()
    }

    /// Poisson cdf by naive multiplicative recurrence, independent of the log-space path.
    fn series_cdf(k: i64, lambda: f64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let mut term = (-lambda).exp();
        let mut sum = term;
        for i in 1..=k {
            term *= lambda / i as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn pmf_at_zero_is_exp_minus_rate() {
        let p = pois_pmf(0, rate(1.0)).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rate_puts_all_mass_at_zero() {
        assert_eq!(pois_pmf(3, rate(0.0)).unwrap(), 0.0);
        assert_eq!(pois_pmf(0, rate(0.0)).unwrap(), 1.0);
        assert_eq!(pois_cdf(0, rate(0.0)), 1.0);
        assert_eq!(pois_quantile(0.999, rate(0.0)).unwrap(), 0);
    }

    #[test]
    fn pmf_matches_cumulative_difference() {
        let expected = series_cdf(2, 2.5) - series_cdf(1, 2.5);
        let p = pois_pmf(2, rate(2.5)).unwrap();
        assert!((p - expected).abs() < 1e-14, "{p} vs {expected}");
    }

    #[test]
    fn pmf_survives_large_rates() {
        let p = pois_pmf(500, rate(500.0)).unwrap();
        // Stirling: 1/sqrt(2π·500)
        assert!((p - 0.017839).abs() < 1e-5, "{p}");
        // log terms near 2.6e3 leave a few 1e-12 of rounding in the total
        let total: f64 = (0..2000).map(|k| pois_pmf(k, rate(500.0)).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pmf_rejects_bad_inputs() {
        assert!(matches!(pois_pmf(-1, rate(1.0)), Err(Error::Domain(_))));
        assert!(PoissonRate::new(f64::NAN).is_err());
        assert!(PoissonRate::new(f64::INFINITY).is_err());
        assert!(PoissonRate::new(-0.1).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(pois_cdf(-1, rate(5.0)), 0.0);
        assert!((pois_cdf(0, rate(1.0)) - (-1.0f64).exp()).abs() < 1e-15);
        let g10 = pois_cdf(10, rate(1.0));
        assert!(g10 >= 1.0 - 1e-7);
        assert!((g10 - series_cdf(10, 1.0)).abs() < 1e-14);
        assert!((pois_sf(3, rate(2.0)) - (1.0 - series_cdf(3, 2.0))).abs() < 1e-14);
    }

    #[test]
    fn cdf_agrees_with_series_oracle() {
        for &lambda in &[0.3, 1.0, 2.5, 7.0, 30.0] {
            for k in 0..80 {
                let a = pois_cdf(k, rate(lambda));
                let b = series_cdf(k, lambda).min(1.0);
                assert!((a - b).abs() < 1e-13, "λ={lambda} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(pois_quantile(0.0, rate(7.0)).unwrap(), 0);
        // G_1(0) = e^{-1} < 0.5 <= G_1(1)
        assert!(series_cdf(0, 1.0) < 0.5 && 0.5 <= series_cdf(1, 1.0));
        assert_eq!(pois_quantile(0.5, rate(1.0)).unwrap(), 1);
        assert!(pois_quantile(1.5, rate(1.0)).is_err());
        assert!(pois_quantile(-0.1, rate(1.0)).is_err());
        assert!(pois_quantile(f64::NAN, rate(1.0)).is_err());
    }

    #[test]
    fn quantile_at_one_is_capped() {
        let k = pois_quantile(1.0, rate(3.0)).unwrap();
        assert!(pois_cdf(k as i64, rate(3.0)) >= QUANTILE_UPPER_MASS || k > 20);
        assert!(pois_cdf(k as i64 - 1, rate(3.0)) < QUANTILE_UPPER_MASS);
    }

    #[test]
    fn cdf_table_matches_pointwise_cdf() {
        let t = CdfTable::up_to(rate(4.2), 40);
        for k in -2..=40 {
            assert_eq!(t.get(k), pois_cdf(k, rate(4.2)));
        }
        let u = CdfTable::until_mass(rate(4.2), 1.0 - 1e-12);
        assert!(*u.values().last().unwrap() >= 1.0 - 1e-12);
        for &p in &[0.01, 0.3, 0.5, 0.99, 0.999999] {
            assert_eq!(u.quantile(p), pois_quantile(p, rate(4.2)).unwrap());
        }
    }

    #[test]
    fn comono_pmf_examples() {
        let spec = ComonotonicSpec::from_values(&[1.0, 1.0]).unwrap();
        let e = (-1.0f64).exp();
        // min(G(0), G(0)) - max(G(-1), G(-1)) with series cdfs
        let oracle = series_cdf(0, 1.0).min(series_cdf(0, 1.0)) - 0.0;
        let p = comono_pmf(&[0, 0], &spec).unwrap();
        assert!((p - oracle).abs() < 1e-15 && (p - e).abs() < 1e-15);
        assert_eq!(comono_pmf(&[0, 5], &spec).unwrap(), 0.0);
        assert_eq!(comono_pmf(&[-1, 0], &spec).unwrap(), 0.0);
        assert!(comono_pmf(&[0], &spec).is_err());

        let single = ComonotonicSpec::from_values(&[3.3]).unwrap();
        for k in 0..15 {
            let a = comono_pmf(&[k], &single).unwrap();
            let b = pois_pmf(k, rate(3.3)).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_rate_comonotonic_mass_is_diagonal() {
        let spec = ComonotonicSpec::from_values(&[1.0, 1.0]).unwrap();
        for a in 0..12i64 {
            for b in 0..12i64 {
                let p = comono_pmf(&[a, b], &spec).unwrap();
                if a == b {
                    assert!((p - pois_pmf(a, rate(1.0)).unwrap()).abs() < 1e-14);
                } else {
                    assert_eq!(p, 0.0);
                }
            }
        }
    }

    #[test]
    fn comono_sample_examples() {
        let spec = ComonotonicSpec::from_values(&[1.0, 4.0, 0.0]).unwrap();
        assert_eq!(comono_sample(0.0, &spec).unwrap(), vec![0, 0, 0]);
        let s = comono_sample(0.5, &spec).unwrap();
        let q4 = (0..).find(|&k| series_cdf(k, 4.0) >= 0.5).unwrap() as u64;
        assert_eq!(s, vec![1, q4, 0]);
        let eq = ComonotonicSpec::from_values(&[2.5, 2.5, 2.5]).unwrap();
        for i in 1..50 {
            let v = comono_sample(i as f64 / 50.0, &eq).unwrap();
            assert!(v.iter().all(|&x| x == v[0]));
        }
        assert!(comono_sample(1.1, &spec).is_err());
    }

    #[test]
    fn chain_masses_match_pointwise_formula() {
        let rates = [1.3, 0.4, 2.0];
        let tables: Vec<CdfTable> = rates.iter().map(|&r| CdfTable::up_to(rate(r), 30)).collect();
        let refs: Vec<&CdfTable> = tables.iter().collect();
        let chain = ComonotonicChain::within(&refs, &[30, 30, 30]);
        let spec = ComonotonicSpec::from_values(&rates).unwrap();
        let mut total = 0.0;
        for (z, m) in chain.iter() {
            let zi: Vec<i64> = z.iter().map(|&v| v as i64).collect();
            assert_eq!(m, comono_pmf(&zi, &spec).unwrap());
            total += m;
        }
        assert!((total - 1.0).abs() < 1e-12);
        // nondecreasing in every coordinate
        for w in 1..chain.len() {
            let (a, b) = (chain.point(w - 1), chain.point(w));
            assert!(a.iter().zip(b).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn chain_stops_at_box_boundary() {
        let tables = [CdfTable::up_to(rate(5.0), 3), CdfTable::up_to(rate(1.0), 3)];
        let refs: Vec<&CdfTable> = tables.iter().collect();
        let chain = ComonotonicChain::within(&refs, &[3, 3]);
        assert!(chain.iter().all(|(z, _)| z[0] <= 3 && z[1] <= 3));
        assert!(!chain.is_empty());
    }
}
