//! Fit reports: machine-readable document plus a short human table.

use std::fmt::Write as _;

use mpcs_core::estimate::quantity_names;
use mpcs_core::moments::cor_matrix;
use mpcs_core::{BootstrapResult, FitResult};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootReport {
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub failures: usize,
    pub names: Vec<String>,
    pub se: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
}

impl BootReport {
    pub fn new(res: &BootstrapResult, seed: u64) -> Self {
        BootReport {
            b: res.b,
            seed,
            failures: res.failures,
            names: res.names.clone(),
            se: res.se.clone(),
            ci_lo: res.ci_lo.clone(),
            ci_hi: res.ci_hi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub method: String,
    pub n: usize,
    pub columns: Vec<String>,
    pub lambda_hat: Vec<f64>,
    pub omega_hat: Vec<Vec<f64>>,
    pub cor_hat: Vec<Vec<f64>>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// 1-based `(j, k)` of clamped moment estimates.
    pub capped: Vec<[usize; 2]>,
    pub warnings: Vec<String>,
    pub boot: Option<BootReport>,
    pub timing_ms: Option<f64>,
}

impl FitReport {
    pub fn new(fit: &FitResult, n: usize, columns: Vec<String>) -> Self {
        FitReport {
            method: fit.method.tag().to_string(),
            n,
            columns,
            lambda_hat: fit.params.lambdas().to_vec(),
            omega_hat: fit.params.weights().to_vec(),
            cor_hat: cor_matrix(&fit.params),
            loglik: fit.loglik,
            converged: fit.converged,
            iterations: fit.iterations,
            capped: fit.capped_indices.iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
            warnings: fit.warnings.clone(),
            boot: None,
            timing_ms: None,
        }
    }

    /// Estimates in [`quantity_names`] order.
    fn estimates(&self) -> Vec<f64> {
        let d = self.lambda_hat.len();
        let mut q = self.lambda_hat.clone();
        for row in &self.omega_hat[1..] {
            q.extend(&row[..row.len() - 1]);
        }
        for i in 0..d {
            for j in i + 1..d {
                q.push(self.cor_hat[i][j]);
            }
        }
        q
    }

    /// Estimates to 3 decimals with bootstrap SEs and intervals when present.
    pub fn table(&self) -> String {
        let names = quantity_names(self.lambda_hat.len());
        let est = self.estimates();
        let mut out = String::new();
        let _ = writeln!(out, "method {} (n = {})", self.method, self.n);
        match &self.boot {
            Some(b) => {
                let _ = writeln!(out, "{:<12} {:>9} {:>9}   95% interval", "parameter", "estimate", "(se)");
                for (k, name) in names.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{:<12} {:>9.3} {:>9}   [{:.3}, {:.3}]",
                        name,
                        est[k],
                        format!("({:.3})", b.se[k]),
                        b.ci_lo[k],
                        b.ci_hi[k]
                    );
                }
            }
            None => {
                let _ = writeln!(out, "{:<12} {:>9}", "parameter", "estimate");
                for (k, name) in names.iter().enumerate() {
                    let _ = writeln!(out, "{:<12} {:>9.3}", name, est[k]);
                }
            }
        }
        if let Some(ll) = self.loglik {
            let _ = writeln!(out, "log-likelihood {ll:.3}");
        }
        if !self.converged {
            let _ = writeln!(out, "warning: optimizer did not converge");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Square matrix printed at 4 decimals.
pub fn format_matrix(m: &[Vec<f64>]) -> String {
    m.iter()
        .map(|row| row.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpcs_core::estimate::fit_mm;
    use mpcs_core::CountMatrix;

    #[test]
    fn estimates_follow_quantity_order() {
        let data = CountMatrix::from_rows(&[vec![1, 2, 0], vec![3, 5, 1], vec![0, 1, 2], vec![2, 2, 4]]).unwrap();
        let fit = fit_mm(&data).unwrap();
        let rep = FitReport::new(&fit, 4, vec!["a".into(), "b".into(), "c".into()]);
        let q = mpcs_core::estimate::quantities(&fit.params);
        assert_eq!(rep.estimates(), q);
        assert!(rep.table().contains("omega[3][2]"));
    }

    #[test]
    fn matrix_has_four_decimals() {
        assert_eq!(format_matrix(&[vec![1.0, 0.5], vec![0.5, 1.0]]), "1.0000 0.5000\n0.5000 1.0000");
    }
}
