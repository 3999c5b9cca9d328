//! Parameter estimation.
//!
//! Four estimators share the same output type:
//!
//! | method | rates             | weights                                         |
//! |--------|-------------------|-------------------------------------------------|
//! | MM     | column means      | sequential covariance matching                  |
//! | SQ     | column means      | sequential 1-D pairwise-likelihood maximization |
//! | 2S     | column means      | joint likelihood over all weights               |
//! | ML     | joint likelihood  | joint likelihood                                |
//!
//! The likelihood fits are started through the cascade SQ → 2S → ML.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CountMatrix, ModelParams};

mod bootstrap;
mod gof;
mod likelihood;
mod mm;
pub mod nelder_mead;
pub mod reparam;
mod sequential;

pub use bootstrap::{bootstrap, percentile, quantities, quantity_names, BootstrapResult};
pub use gof::{poisson_gof, GofResult};
pub use likelihood::{fit_2s, fit_ml};
pub use mm::fit_mm;
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadReport};
pub use reparam::{from_unconstrained, to_unconstrained, UnconstrainedPoint};
pub use sequential::{fit_sq, SQ_GRID_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Method of moments.
    Mm,
    /// Sequential pairwise likelihood.
    Sq,
    /// Two-step: rates from the margins, then weights from the joint likelihood.
    TwoStep,
    /// Full maximum likelihood.
    Ml,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mm, Method::Sq, Method::TwoStep, Method::Ml];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Mm => "MM",
            Method::Sq => "SQ",
            Method::TwoStep => "2S",
            Method::Ml => "ML",
        }
    }

    pub fn is_likelihood(self) -> bool {
        self != Method::Mm
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" => Ok(Method::Mm),
            "sq" => Ok(Method::Sq),
            "2s" => Ok(Method::TwoStep),
            "ml" => Ok(Method::Ml),
            other => Err(Error::domain(format!("unknown method {other:?} (expected mm, sq, 2s or ml)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub method: Method,
    /// Full log-likelihood at `params`; absent for MM.
    pub loglik: Option<f64>,
    /// Non-converged fits still carry the best point found.
    pub converged: bool,
    pub iterations: usize,
    /// `(j, k)` (0-based) where an MM weight `ω_jk` was clamped to 0 or 1.
    pub capped_indices: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Fits `method`, running the SQ → 2S → ML starting-value cascade as needed.
pub fn fit(data: &CountMatrix, method: Method) -> Result<FitResult> {
    match method {
        Method::Mm => fit_mm(data),
        Method::Sq => fit_sq(data),
        Method::TwoStep => {
            let sq = fit_sq(data)?;
            fit_2s(data, &sq.params)
        }
        Method::Ml => {
            let sq = fit_sq(data)?;
            let two = fit_2s(data, &sq.params)?;
            fit_ml(data, &two.params)
        }
    }
}

/// Shared preconditions: enough rows and a positive mean in every column.
fn check_data(data: &CountMatrix, min_rows: usize) -> Result<Vec<f64>> {
    if data.n_rows() < min_rows {
        return Err(Error::Estimation(format!(
            "need at least {min_rows} observations, got {}",
            data.n_rows()
        )));
    }
    let means = data.column_means();
    if let Some(c) = means.iter().position(|&m| m <= 0.0) {
        return Err(Error::Estimation(format!(
            "column {} has zero mean; its Poisson rate is not estimable",
            c + 1
        )));
    }
    Ok(means)
}

/// Rescales a partially estimated weight row so its off-diagonal part is at
/// most one; returns the row with the diagonal remainder appended.
fn close_row(off_diagonal: &[f64]) -> (Vec<f64>, bool) {
    let sum: f64 = off_diagonal.iter().sum();
    let mut row = off_diagonal.to_vec();
    if sum > 1.0 {
        row.iter_mut().for_each(|w| *w /= sum);
        let s2: f64 = row.iter().sum();
        row.push((1.0 - s2).max(0.0));
        (row, true)
    } else {
        row.push((1.0 - sum).max(0.0));
        (row, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("xx".parse::<Method>().is_err());
    }

    #[test]
    fn close_row_floors_and_renormalizes() {
        let (row, renorm) = close_row(&[0.7, 0.6]);
        assert!(renorm);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        let (row, renorm) = close_row(&[0.2, 0.3]);
        assert!(!renorm);
        assert_eq!(row, vec![0.2, 0.3, 0.5]);
    }
}
