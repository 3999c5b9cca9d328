//! Command implementations behind the `mpcs` binary.
//!
//! Each command reads its inputs, writes its output file and returns the text
//! meant for standard output; the binary only parses arguments and maps
//! errors to exit codes.

pub mod error;
pub mod exceed;
pub mod io;
pub mod report;
pub mod scenario;

use std::path::Path;
use std::time::Instant;

use mpcs_core::estimate::fit;
use mpcs_core::model::sample;
use mpcs_core::moments::cor_matrix;
use mpcs_core::streams::stream_rng;
use mpcs_core::{bootstrap, Method};

pub use error::{CliError, Result, EXIT_INPUT, EXIT_NONCONVERGENCE};
use report::{format_matrix, BootReport, FitReport};
use scenario::{run_scenario, ScenarioSpec};

/// Writes `n` draws from the model in `params` to `out`; returns the implied
/// correlation matrix.
pub fn simulate(params: &Path, n: usize, seed: u64, out: &Path) -> Result<String> {
    let p = io::read_params(params)?;
    let data = sample(&p, n, &mut stream_rng(seed, 0))?;
    io::write_counts(out, &io::default_columns(p.dim()), &data)?;
    Ok(format!("implied correlation matrix\n{}\n", format_matrix(&cor_matrix(&p))))
}

pub fn cor(params: &Path) -> Result<String> {
    let p = io::read_params(params)?;
    Ok(format!("{}\n", format_matrix(&cor_matrix(&p))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    pub boot: usize,
    pub seed: u64,
    /// Leave `timing_ms` empty so reruns are byte-identical.
    pub omit_timing: bool,
}

/// Fits `data`, optionally bootstraps, and writes the report to `out`.
pub fn fit_file(data: &Path, opts: &FitOptions, out: &Path) -> Result<FitReport> {
    let file = io::read_counts(data)?;
    let start = Instant::now();
    let fitted = fit(&file.data, opts.method)?;
    let mut rep = FitReport::new(&fitted, file.data.n_rows(), file.columns);
    if opts.boot > 0 {
        let res = bootstrap(&file.data, opts.method, opts.boot, opts.seed)?;
        rep.boot = Some(BootReport::new(&res, opts.seed));
    }
    if !opts.omit_timing {
        rep.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    io::write_json(out, &rep)?;
    Ok(rep)
}

/// Runs a replication study and writes its report to `out`.
pub fn scenario_file(spec: &ScenarioSpec, omit_timing: bool, out: &Path) -> Result<scenario::ScenarioReport> {
    let mut rep = run_scenario(spec)?;
    if omit_timing {
        rep.methods.iter_mut().for_each(|m| m.timing_ms = None);
    }
    io::write_json(out, &rep)?;
    Ok(rep)
}

/// Counts exceedances in a daily file, writes the kept years' counts to
/// `out` and, when requested, the per-year summary to `summary`.
pub fn exceed_file(
    data: &Path,
    cfg: &exceed::ExceedanceConfig,
    out: &Path,
    summary: Option<&Path>,
) -> Result<exceed::ExceedanceTable> {
    let series = exceed::read_daily(data, cfg)?;
    let table = exceed::count_exceedances(&series, cfg);
    io::write_counts(out, &table.stations, &table.counts()?)?;
    if let Some(path) = summary {
        io::write_json(path, &table)?;
    }
    Ok(table)
}

/// Parses a comma-separated method list such as `mm,sq,2s,ml`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m: Method = tok.parse().map_err(|e: mpcs_core::Error| CliError::input(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::input("empty method list"));
    }
    Ok(out)
}

/// Parses comma-separated reals.
pub fn parse_reals(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("{t:?} is not a number")))
        })
        .collect()
}
