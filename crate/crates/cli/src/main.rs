use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpminimax_cli::{compare, dry_run, load_config, run_experiment, sweep, CliResult, RunOptions};

#[derive(Parser)]
#[command(name = "dpminimax", version, about = "Differentially private minimax experiments")]
struct Cli {
    /// Added to every seed listed in the config.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    /// Validate and print the resolved schedule without running.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also render grad_phi.svg for each run.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Experiment TOML file.
        config: PathBuf,
    },
    /// Run two experiments on the same seeds and compare a metric pairwise.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// A summary metric such as grad_phi_norm, auc, mspbe or worst_group_loss; deltas are A − B.
        #[arg(long)]
        metric: String,
    },
    /// Rerun an experiment over values of epsilon, n or d.
    Sweep {
        config: PathBuf,
        /// epsilon, n or d.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        /// Defaults to the problem family's headline metric.
        #[arg(long)]
        metric: Option<String>,
    },
}

fn print_dry_run(path: &Path, opts: &RunOptions) -> CliResult<()> {
    let l = load_config(path)?;
    let runs = dry_run(&l, opts)?;
    println!("{}", serde_json::to_string_pretty(&runs)?);
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    let opts = RunOptions {
        out: cli.out,
        seed_offset: cli.seed_offset,
        svg: cli.svg,
    };
    match cli.command {
        Command::Run { config } => {
            if cli.dry_run {
                return print_dry_run(&config, &opts);
            }
            let l = load_config(&config)?;
            let r = run_experiment(&l, &opts)?;
            println!("{}", serde_json::to_string_pretty(&r.summary.aggregate)?);
            eprintln!("wrote {}", r.out_dir.display());
        }
        Command::Compare {
            config_a,
            config_b,
            metric,
        } => {
            if cli.dry_run {
                print_dry_run(&config_a, &opts)?;
                return print_dry_run(&config_b, &opts);
            }
            let a = load_config(&config_a)?;
            let b = load_config(&config_b)?;
            let report = compare(&a, &b, &metric, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep {
            config,
            axis,
            values,
            metric,
        } => {
            let axis = axis.parse()?;
            let values = dpminimax_cli::sweep::parse_values(&values)?;
            let l = load_config(&config)?;
            if cli.dry_run {
                for v in &values {
                    let point = dpminimax_cli::LoadedConfig {
                        config: dpminimax_cli::sweep::apply_axis(&l.config, axis, *v)?,
                        ..l.clone()
                    };
                    println!("{}", serde_json::to_string_pretty(&dry_run(&point, &opts)?)?);
                }
                return Ok(());
            }
            let rows = sweep(&l, axis, &values, metric.as_deref(), &opts)?;
            eprintln!("{} rows", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
