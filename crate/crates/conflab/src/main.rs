use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conflab::config::{ExperimentConfig, ExperimentKind};
use conflab::experiment::{generate_data, run_experiment};

/// Self-adaptive training laboratory: dataset generation, single training
/// runs, and preset experiment grids with machine-readable outputs.
#[derive(Parser)]
#[command(name = "conflab", version, about)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Maximum number of concurrent grid cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Overrides the config's training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the output directory (flag beats the CONFLAB_OUTPUT
    /// environment variable, which beats the config).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset as train/test CSVs plus a JSON sidecar.
    GenData,
    /// Run the configured training method and write its per-epoch record.
    Train,
    /// Run the configured experiment preset over its full grid.
    Experiment,
}

fn effective_output(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &cli.output {
        return out.clone();
    }
    if let Ok(env_out) = std::env::var("CONFLAB_OUTPUT") {
        if !env_out.is_empty() {
            return PathBuf::from(env_out);
        }
    }
    config.output_dir.clone()
}

fn load_config(cli: &Cli) -> conflab::Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| conflab::CliError::Config("--config <path> is required".to_string()))?;
    ExperimentConfig::load(path)
}

fn run(cli: &Cli) -> conflab::Result<bool> {
    let mut config = load_config(cli)?;
    let output = effective_output(cli, &config);
    let base_seed = cli.seed.unwrap_or(config.train.seed);

    match cli.command {
        Command::GenData => {
            generate_data(&config, &output)?;
            Ok(true)
        }
        Command::Train => {
            config.experiment = ExperimentKind::SingleRun;
            let report = run_experiment(&config, &output, base_seed, cli.jobs)?;
            report_failures(&report);
            Ok(report.all_ok())
        }
        Command::Experiment => {
            let report = run_experiment(&config, &output, base_seed, cli.jobs)?;
            report_failures(&report);
            Ok(report.all_ok())
        }
    }
}

fn report_failures(report: &conflab::experiment::ExperimentReport) {
    for (cell, error) in &report.failures {
        eprintln!("cell {cell} failed: {error}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
