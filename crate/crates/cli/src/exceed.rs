//! Yearly counts of threshold exceedances from daily station series.

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use mpcs_core::CountMatrix;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Cells read as missing observations.
const MISSING_MARKERS: [&str; 4] = ["", "NA", "NaN", "M"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceConfig {
    /// One per station, in station order.
    pub thresholds: Vec<f64>,
    pub date_column: String,
    /// Station columns; every non-date column when absent.
    pub station_columns: Option<Vec<String>>,
    /// Count runs of consecutive exceedance days as one event.
    pub decluster: bool,
    /// Years where some station misses a larger share of its recorded days
    /// are dropped.
    pub max_missing: f64,
}

impl ExceedanceConfig {
    pub fn new(thresholds: Vec<f64>) -> Self {
        ExceedanceConfig {
            thresholds,
            date_column: "date".to_string(),
            station_columns: None,
            decluster: true,
            max_missing: 0.10,
        }
    }
}

/// Daily values for several stations; `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub stations: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub year: i32,
    pub days: usize,
    pub counts: Vec<u32>,
    pub missing: Vec<usize>,
    pub missing_fraction: Vec<f64>,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceTable {
    pub stations: Vec<String>,
    pub thresholds: Vec<f64>,
    pub decluster: bool,
    pub years: Vec<YearSummary>,
}

impl ExceedanceTable {
    /// Counts of the kept years, one row per year.
    pub fn counts(&self) -> Result<CountMatrix> {
        let values: Vec<u32> = self
            .years
            .iter()
            .filter(|y| y.kept)
            .flat_map(|y| y.counts.iter().copied())
            .collect();
        if values.is_empty() {
            return Err(CliError::input("no year passes the missingness filter"));
        }
        Ok(CountMatrix::new(self.stations.len(), values)?)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<6} {:>5}", "year", "days");
        for s in &self.stations {
            out.push_str(&format!(" {:>10} {:>7}", s, "miss"));
        }
        out.push_str("  status\n");
        for y in &self.years {
            out.push_str(&format!("{:<6} {:>5}", y.year, y.days));
            for (c, f) in y.counts.iter().zip(&y.missing_fraction) {
                out.push_str(&format!(" {:>10} {:>7.3}", c, f));
            }
            out.push_str(if y.kept { "  kept\n" } else { "  dropped\n" });
        }
        out
    }
}

pub fn read_daily(path: &Path, cfg: &ExceedanceConfig) -> Result<DailySeries> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_daily(&bytes, cfg).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_daily(bytes: &[u8], cfg: &ExceedanceConfig) -> Result<DailySeries> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("no column named {name:?}")))
    };
    let date_col = find(&cfg.date_column)?;
    let stations: Vec<String> = match &cfg.station_columns {
        Some(cols) => cols.clone(),
        None => header.iter().filter(|h| **h != cfg.date_column).cloned().collect(),
    };
    let station_cols = stations.iter().map(|s| find(s)).collect::<Result<Vec<_>>>()?;
    let mut seen = station_cols.clone();
    seen.push(date_col);
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::input("date and station columns must be distinct"));
    }
    if stations.is_empty() {
        return Err(CliError::input("no station columns"));
    }
    if cfg.thresholds.len() != stations.len() {
        return Err(CliError::input(format!(
            "{} thresholds given for {} stations",
            cfg.thresholds.len(),
            stations.len()
        )));
    }
    if let Some(t) = cfg.thresholds.iter().find(|t| !t.is_finite()) {
        return Err(CliError::input(format!("threshold {t} is not finite")));
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        if rec.len() != header.len() {
            return Err(CliError::input(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        let raw = rec[date_col].trim();
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| CliError::input(format!("row {row}: unparseable date {raw:?} (expected YYYY-MM-DD)")))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(CliError::input(format!("row {row}: date {date} is not after {prev}")));
            }
        }
        let mut vals = Vec::with_capacity(station_cols.len());
        for (&c, name) in station_cols.iter().zip(&stations) {
            let cell = rec[c].trim();
            if MISSING_MARKERS.contains(&cell) {
                vals.push(None);
            } else {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::input(format!("row {row}, column {name}: {cell:?} is not a number"))
                })?;
                vals.push(Some(v));
            }
        }
        dates.push(date);
        values.push(vals);
    }
    Ok(DailySeries {
        stations,
        dates,
        values,
    })
}

/// Per year and station, the number of exceedance events.
///
/// A day exceeds when its value is strictly above the station threshold.
/// With declustering, a run of exceedance days on consecutive calendar dates
/// counts once; a missing reading, a gap in the dates or a new year ends the
/// run.
pub fn count_exceedances(series: &DailySeries, cfg: &ExceedanceConfig) -> ExceedanceTable {
    let s = series.stations.len();
    let mut years: Vec<YearSummary> = Vec::new();
    let mut in_run = vec![false; s];
    let mut prev_date: Option<NaiveDate> = None;
    for (date, vals) in series.dates.iter().zip(&series.values) {
        let year = date.year();
        if years.last().map_or(true, |y| y.year != year) {
            years.push(YearSummary {
                year,
                days: 0,
                counts: vec![0; s],
                missing: vec![0; s],
                missing_fraction: vec![0.0; s],
                kept: true,
            });
            in_run.iter_mut().for_each(|r| *r = false);
        }
        let consecutive = prev_date.map_or(false, |p| p.succ_opt() == Some(*date));
        let current = years.last_mut().expect("pushed above");
        current.days += 1;
        for k in 0..s {
            match vals[k] {
                None => {
                    current.missing[k] += 1;
                    in_run[k] = false;
                }
                Some(v) => {
                    let over = v > cfg.thresholds[k];
                    if over && !(cfg.decluster && in_run[k] && consecutive) {
                        current.counts[k] += 1;
                    }
                    in_run[k] = over;
                }
            }
        }
        prev_date = Some(*date);
    }
    for y in &mut years {
        y.missing_fraction = y.missing.iter().map(|&m| m as f64 / y.days as f64).collect();
        y.kept = y.missing_fraction.iter().all(|&f| f <= cfg.max_missing);
    }
    ExceedanceTable {
        stations: series.stations.clone(),
        thresholds: cfg.thresholds.clone(),
        decluster: cfg.decluster,
        years,
    }
}
