use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpcs_cli::exceed::ExceedanceConfig;
use mpcs_cli::scenario::ScenarioSpec;
use mpcs_cli::{parse_methods, parse_reals, CliError, FitOptions, EXIT_NONCONVERGENCE};
use mpcs_core::Method;

#[derive(Parser)]
#[command(name = "mpcs", version, about = "Multivariate Poisson model with comonotonic shocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a count sample from a parameter file.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model to a count CSV file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// mm, sq, 2s or ml.
        #[arg(long)]
        method: Method,
        /// Bootstrap replicates (0 disables).
        #[arg(long, default_value_t = 0)]
        boot: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write `timing_ms` as null.
        #[arg(long)]
        omit_timing: bool,
    },
    /// Replication study for a named setting (1A, 1B, 2A, 2B, 3A, 3B).
    Scenario {
        #[arg(long)]
        id: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated subset of mm,sq,2s,ml.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        omit_timing: bool,
    },
    /// Print the correlation matrix implied by a parameter file.
    Cor {
        #[arg(long)]
        params: PathBuf,
    },
    /// Count yearly threshold exceedances in a daily station file.
    Exceed {
        #[arg(long)]
        data: PathBuf,
        /// One threshold per station, comma-separated.
        #[arg(long)]
        thresholds: String,
        /// Count every exceedance day instead of runs.
        #[arg(long)]
        no_decluster: bool,
        #[arg(long, default_value = "date")]
        date_column: String,
        /// Comma-separated station columns (default: all but the date).
        #[arg(long)]
        stations: Option<String>,
        /// Drop years where a station misses more than this share of days.
        #[arg(long, default_value_t = 0.10)]
        max_missing: f64,
        /// Also write the per-year summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { params, n, seed, out } => {
            print!("{}", mpcs_cli::simulate(&params, n, seed, &out)?);
        }
        Command::Fit {
            data,
            method,
            boot,
            seed,
            out,
            omit_timing,
        } => {
            let opts = FitOptions {
                method,
                boot,
                seed,
                omit_timing,
            };
            let rep = mpcs_cli::fit_file(&data, &opts, &out)?;
            print!("{}", rep.table());
            if !rep.converged {
                return Ok(EXIT_NONCONVERGENCE);
            }
        }
        Command::Scenario {
            id,
            n,
            reps,
            methods,
            seed,
            out,
            omit_timing,
        } => {
            let mut spec = ScenarioSpec::named(&id)?;
            if let Some(n) = n {
                spec.n = n;
            }
            if let Some(r) = reps {
                spec.reps = r;
            }
            if let Some(m) = methods {
                spec.methods = parse_methods(&m)?;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            let rep = mpcs_cli::scenario_file(&spec, omit_timing, &out)?;
            print!("{}", rep.table());
        }
        Command::Cor { params } => print!("{}", mpcs_cli::cor(&params)?),
        Command::Exceed {
            data,
            thresholds,
            no_decluster,
            date_column,
            stations,
            max_missing,
            summary,
            out,
        } => {
            let mut cfg = ExceedanceConfig::new(parse_reals(&thresholds)?);
            cfg.decluster = !no_decluster;
            cfg.date_column = date_column;
            cfg.station_columns = stations.map(|s| s.split(',').map(|t| t.trim().to_string()).collect());
            cfg.max_missing = max_missing;
            let table = mpcs_cli::exceed_file(&data, &cfg, &out, summary.as_deref())?;
            print!("{}", table.table());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
