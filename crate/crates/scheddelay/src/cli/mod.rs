//! Experiment drivers: scenario files, the four subcommands, CSV rows, and
//! the self-verification oracle.

pub mod commands;
pub mod config;
pub mod oracle;

pub use commands::{
    cmd_analyze, cmd_outage_sweep, cmd_simulate, derive_seed, rows_to_csv, sweep_out_path,
    write_csv, CliError, ResultRow, CSV_HEADER,
};
pub use config::{ConfigError, ScenarioConfig, Spacing, TGridSpec};
pub use oracle::{run_criteria, CriterionReport, CRITERION_COUNT};
