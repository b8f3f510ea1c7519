//! Experiment runner for `dpminimax`: TOML configs in, trace CSVs, summary
//! JSON, sweep CSVs and paired comparisons out.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod problem;
pub mod resolve;
pub mod runner;
pub mod sweep;

pub use compare::{compare, compare_summaries, sign_test, CompareReport};
pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
pub use error::{CliError, CliResult, ErrorKind};
pub use runner::{dry_run, run_experiment, run_seed, RunOptions, Summary, SummaryRecord};
pub use sweep::{sweep, Axis, SweepRow};
