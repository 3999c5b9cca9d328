//! Simulation studies over the six named parameter settings.

use std::collections::BTreeMap;
use std::time::Instant;

use mpcs_core::estimate::{fit, percentile, quantities, quantity_names};
use mpcs_core::model::sample;
use mpcs_core::streams::stream_rng;
use mpcs_core::{Method, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SCENARIO_IDS: [&str; 6] = ["1A", "1B", "2A", "2B", "3A", "3B"];

const RATES_A: [f64; 3] = [1.0, 2.0, 3.0];
const RATES_B: [f64; 3] = [4.0, 6.0, 8.0];

/// One named setting plus the replication plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub lambdas: Vec<f64>,
    /// `(ω21, ω31, ω32)`.
    pub weights: [f64; 3],
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Setting `id` with n = 1000, 100 replicates, all methods, seed 1.
    pub fn named(id: &str) -> Result<Self> {
        let id = id.to_ascii_uppercase();
        let mut chars = id.chars();
        let weights = match chars.next() {
            Some('1') => [0.9, 0.7, 0.1],
            Some('2') => [0.25, 0.1, 0.6],
            Some('3') => [0.075, 0.075, 0.1],
            _ => return Err(unknown(&id)),
        };
        let lambdas = match (chars.next(), chars.next()) {
            (Some('A'), None) => RATES_A,
            (Some('B'), None) => RATES_B,
            _ => return Err(unknown(&id)),
        };
        Ok(ScenarioSpec {
            id,
            lambdas: lambdas.to_vec(),
            weights,
            n: 1000,
            reps: 100,
            methods: Method::ALL.to_vec(),
            seed: 1,
        })
    }

    pub fn params(&self) -> ModelParams {
        let [w21, w31, w32] = self.weights;
        ModelParams::from_lower(self.lambdas.clone(), &[vec![w21], vec![w31, w32]])
            .expect("named settings are valid")
    }
}

fn unknown(id: &str) -> CliError {
    CliError::input(format!(
        "unknown scenario {id:?} (expected one of {})",
        SCENARIO_IDS.join(", ")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    pub mae: f64,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    /// Converged fits entering the summaries.
    pub fits: usize,
    pub nonconverged: usize,
    pub failures: usize,
    pub params: Vec<ParamSummary>,
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub id: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub lambda: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub methods: Vec<MethodSummary>,
    /// Converged replicate estimates per method, in replicate order.
    #[serde(skip)]
    pub estimates: BTreeMap<Method, Vec<Vec<f64>>>,
}

struct Outcome {
    estimate: Option<Vec<f64>>,
    converged: bool,
    millis: f64,
}

/// Simulates `reps` datasets and fits every method to each.
///
/// Replicate `r` uses `stream_rng(seed, r)`; replicates run in parallel and
/// are merged in index order, so the report does not depend on scheduling
/// (timings aside).
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    if spec.reps == 0 || spec.n < 2 {
        return Err(CliError::input("scenario needs reps >= 1 and n >= 2"));
    }
    let params = spec.params();
    let truth = quantities(&params);
    let per_rep: Vec<Vec<Outcome>> = (0..spec.reps)
        .into_par_iter()
        .map(|r| {
            let data = sample(&params, spec.n, &mut stream_rng(spec.seed, r as u64))
                .expect("n >= 1 and params valid");
            spec.methods
                .iter()
                .map(|&m| {
                    let t = Instant::now();
                    let res = fit(&data, m);
                    let millis = t.elapsed().as_secs_f64() * 1e3;
                    match res {
                        Ok(f) => Outcome {
                            estimate: Some(quantities(&f.params)),
                            converged: f.converged,
                            millis,
                        },
                        Err(_) => Outcome {
                            estimate: None,
                            converged: false,
                            millis,
                        },
                    }
                })
                .collect()
        })
        .collect();

    let names = quantity_names(params.dim());
    let mut methods = Vec::new();
    let mut estimates = BTreeMap::new();
    for (mi, &m) in spec.methods.iter().enumerate() {
        let outcomes: Vec<&Outcome> = per_rep.iter().map(|o| &o[mi]).collect();
        let failures = outcomes.iter().filter(|o| o.estimate.is_none()).count();
        let kept: Vec<Vec<f64>> = outcomes
            .iter()
            .filter(|o| o.converged)
            .filter_map(|o| o.estimate.clone())
            .collect();
        let nonconverged = spec.reps - failures - kept.len();
        let timing = outcomes.iter().map(|o| o.millis).sum::<f64>() / spec.reps as f64;
        methods.push(MethodSummary {
            method: m.tag().to_string(),
            fits: kept.len(),
            nonconverged,
            failures,
            params: summarize(&names, &truth, &kept),
            timing_ms: Some(timing),
        });
        estimates.insert(m, kept);
    }
    Ok(ScenarioReport {
        id: spec.id.clone(),
        n: spec.n,
        reps: spec.reps,
        seed: spec.seed,
        lambda: params.lambdas().to_vec(),
        omega: params.weights().to_vec(),
        methods,
        estimates,
    })
}

fn summarize(names: &[String], truth: &[f64], kept: &[Vec<f64>]) -> Vec<ParamSummary> {
    if kept.is_empty() {
        return Vec::new();
    }
    names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let mut col: Vec<f64> = kept.iter().map(|r| r[c]).collect();
            let m = col.len() as f64;
            let mean = col.iter().sum::<f64>() / m;
            let sd = if col.len() > 1 {
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            let mae = col.iter().map(|v| (v - truth[c]).abs()).sum::<f64>() / m;
            col.sort_by(f64::total_cmp);
            ParamSummary {
                name: name.clone(),
                truth: truth[c],
                mean,
                sd,
                mae,
                q025: percentile(&col, 0.025),
                q25: percentile(&col, 0.25),
                median: percentile(&col, 0.5),
                q75: percentile(&col, 0.75),
                q975: percentile(&col, 0.975),
            }
        })
        .collect()
}

impl ScenarioReport {
    pub fn summary(&self, method: Method, name: &str) -> Option<&ParamSummary> {
        self.methods
            .iter()
            .find(|s| s.method == method.tag())?
            .params
            .iter()
            .find(|p| p.name == name)
    }

    /// Mean, SD and MAE per method and parameter at 3 decimals.
    pub fn table(&self) -> String {
        let mut out = format!("scenario {} (n = {}, reps = {}, seed = {})\n", self.id, self.n, self.reps, self.seed);
        out.push_str(&format!(
            "{:<6} {:<12} {:>8} {:>8} {:>8} {:>8}\n",
            "method", "parameter", "truth", "mean", "sd", "mae"
        ));
        for m in &self.methods {
            for p in &m.params {
                out.push_str(&format!(
                    "{:<6} {:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                    m.method, p.name, p.truth, p.mean, p.sd, p.mae
                ));
            }
            let time = m.timing_ms.map_or("-".to_string(), |t| format!("{t:.2} ms/fit"));
            out.push_str(&format!(
                "{:<6} fits {} non-converged {} failed {} time {}\n",
                m.method, m.fits, m.nonconverged, m.failures, time
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_settings() {
        let s = ScenarioSpec::named("1a").unwrap();
        assert_eq!(s.lambdas, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.weights, [0.9, 0.7, 0.1]);
        let s = ScenarioSpec::named("3B").unwrap();
        assert_eq!(s.lambdas, vec![4.0, 6.0, 8.0]);
        assert_eq!(s.weights, [0.075, 0.075, 0.1]);
        for id in SCENARIO_IDS {
            ScenarioSpec::named(id).unwrap().params();
        }
        assert!(ScenarioSpec::named("4A").is_err());
        assert!(ScenarioSpec::named("1AB").is_err());
    }

    #[test]
    fn small_run_is_reproducible() {
        let mut s = ScenarioSpec::named("2A").unwrap();
        s.n = 60;
        s.reps = 4;
        s.methods = vec![Method::Mm, Method::Sq];
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.methods.len(), 2);
        let mm = &a.methods[0];
        assert_eq!(mm.fits + mm.failures + mm.nonconverged, 4);
        assert!(a.summary(Method::Sq, "omega[2][1]").is_some());
    }
}
