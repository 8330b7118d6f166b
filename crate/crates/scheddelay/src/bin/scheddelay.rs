//! Thin command-line front end. All logic lives in the library's `cli`
//! module; this file only parses flags, wires logging and the thread pool,
//! and maps errors to exit codes (0 ok, 1 verification, 2 solver, 3 data).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use scheddelay::cli::{
    cmd_analyze, cmd_outage_sweep, cmd_simulate, rows_to_csv, run_criteria, sweep_out_path,
    write_csv, CliError, ResultRow, ScenarioConfig, CRITERION_COUNT,
};
use scheddelay::queuesim::PolicyKind;

#[derive(Parser)]
#[command(
    name = "scheddelay",
    version,
    about = "Delay analysis and simulation of small-cell downlink scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the analytic delay CDFs for both policies and emit CSV
    Analyze {
        /// Scenario file (TOML); defaults are used when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the scenario's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Simulate coupled network realizations and emit the empirical CDF
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scheduling policy: rs or rr
        #[arg(long, default_value = "rs")]
        policy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analytic delay outage over a (k_s, xi) grid at the configured T0
    OutageSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated per-cell UE counts
        #[arg(long, default_value = "1,2,3,4,5,6,7,8")]
        k_s: String,
        /// Comma-separated arrival probabilities
        #[arg(long, default_value = "0.02,0.10")]
        xi: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; multi-xi sweeps get a _xi suffix per file
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the self-verification criteria, one machine-readable line each
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated criterion ids (default: all)
        #[arg(long)]
        criteria: Option<String>,
        /// Negative control: break a transition-matrix formula on purpose;
        /// the structural criterion must then fail
        #[arg(long, hide = true)]
        mutate_kappa: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SCHEDDELAY_LOG")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn init_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not resize the worker pool: {e}");
        }
    }
}

fn load(config: Option<PathBuf>, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match config {
        Some(p) => ScenarioConfig::from_path(&p.to_string_lossy())?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<PathBuf>, rows: &[ResultRow]) -> Result<(), CliError> {
    match out {
        Some(p) => write_csv(&p.to_string_lossy(), rows),
        None => {
            print!("{}", rows_to_csv(rows));
            Ok(())
        }
    }
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| CliError::Data(format!("bad {what} entry {t:?}: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Analyze { config, seed, out, jobs } => {
            init_jobs(jobs);
            let cfg = load(config, seed)?;
            let rows = cmd_analyze(&cfg)?;
            emit(out, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { config, policy, seed, out, jobs } => {
            init_jobs(jobs);
            let cfg = load(config, seed)?;
            let policy = PolicyKind::from_str(&policy).map_err(CliError::Data)?;
            let rows = cmd_simulate(&cfg, policy)?;
            emit(out, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::OutageSweep { config, k_s, xi, seed, out, jobs } => {
            init_jobs(jobs);
            let cfg = load(config, seed)?;
            let k_list: Vec<usize> = parse_list(&k_s, "k_s")?;
            let xi_list: Vec<f64> = parse_list(&xi, "xi")?;
            let groups = cmd_outage_sweep(&cfg, &k_list, &xi_list)?;
            let n = groups.len();
            for (gxi, rows) in &groups {
                match &out {
                    Some(p) => {
                        let path = sweep_out_path(&p.to_string_lossy(), *gxi, n);
                        write_csv(&path, rows)?;
                        log::info!("wrote {path}");
                    }
                    None => {
                        if n > 1 {
                            println!("# xi = {gxi}");
                        }
                        print!("{}", rows_to_csv(rows));
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config, criteria, mutate_kappa, seed, jobs } => {
            init_jobs(jobs);
            let cfg = load(config, seed)?;
            let ids: Vec<usize> = match criteria {
                Some(text) => parse_list(&text, "criterion id")?,
                None => (1..=CRITERION_COUNT).collect(),
            };
            let reports = run_criteria(&cfg, &ids, mutate_kappa)?;
            let mut all_pass = true;
            for r in &reports {
                println!("{}", r.line());
                all_pass &= r.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
