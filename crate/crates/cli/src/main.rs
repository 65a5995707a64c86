use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qwalk_cli::config::WalkKind;
use qwalk_cli::{run, CliResult, Command, ExperimentConfig, Overrides};

/// Simulate walks on graphs and check their short-time asymptotics.
#[derive(Parser)]
#[command(name = "qwalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (`.toml` or `.json`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Graph file (`.json`, or an edge list).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    kind: Option<WalkKind>,
    /// Dephasing rate, or comma-separated frame frequencies.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    omega: Option<Vec<f64>>,
    #[arg(long, global = true)]
    t_min: Option<f64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(Overrides {
        graph: cli.graph,
        kind: cli.kind,
        omega: cli.omega,
        t_min: cli.t_min,
        t_max: cli.t_max,
        points: cli.points,
        seed: cli.seed,
        tol: cli.tol,
        output_dir: cli.output_dir,
    });
    for path in run(&cfg, cli.command)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
