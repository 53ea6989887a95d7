use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chemotaxis_cli::commands::{dispersion, experiment_cmd, simulate_cmd, sweep_cmd};
use chemotaxis_cli::{CliError, ConfigError, RunConfig};
use clap::{Parser, Subcommand};

/// Keller-Segel chemotaxis lab.
///
/// Parameters come from a `key = value` config file and `--key value`
/// overrides after the command, e.g. `chemotaxis experiment --delta 1e-3`.
#[derive(Parser, Debug)]
#[command(name = "chemotaxis", version)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial data and constant probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Growth rates and eigenvectors of every mode.
    Dispersion(Overrides),
    /// Raw nonlinear trajectory of `delta · w0`.
    Simulate(Overrides),
    /// Dominant-mode tracking report for one amplitude `delta`.
    Experiment(Overrides),
    /// Tracking reports for every amplitude in `deltas`.
    Sweep(Overrides),
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// `--key value` pairs overriding the configuration.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pairs: Vec<String>,
}

fn load(cli: &Cli, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        cfg.merge_text(&text)?;
    }
    cfg.merge_args(&overrides.pairs)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (Command::Dispersion(o) | Command::Simulate(o) | Command::Experiment(o) | Command::Sweep(o)) =
        &cli.command;
    let cfg = load(cli, o)?;
    let out: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.command {
        Command::Dispersion(_) => dispersion(&cfg, out),
        Command::Simulate(_) => simulate_cmd(&cfg, out),
        Command::Experiment(_) => experiment_cmd(&cfg, out),
        Command::Sweep(_) => sweep_cmd(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chemotaxis: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
