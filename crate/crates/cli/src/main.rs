use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qrf_cli::{cmd_game, cmd_sweep, cmd_verify, sweep_csv, CliError, ExitStatus, Overrides, ResultRecord, Scenario};

#[derive(Parser)]
#[command(name = "qrflab", version, about = "Quantum reference frame laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML)
    scenario: PathBuf,
    /// Write the result record here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the data-parallel paths
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Toml,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check the identity suites over a grid of moduli
    Verify(Common),
    /// Play one configured round of the charge game
    Game(Common),
    /// Repeat a game or verify run over a parameter grid
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "toml")]
        format: Format,
    },
}

fn load(c: &Common) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(&c.scenario)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", c.scenario.display())))?;
    let mut scenario = Scenario::parse(&text)?;
    Overrides { tolerance: c.tolerance, seed: c.seed, workers: c.workers }.apply(&mut scenario)?;
    Ok(scenario)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    let (record, out, csv): (ResultRecord, _, bool) = match &cli.command {
        Command::Verify(c) => (cmd_verify(&load(c)?)?, &c.out, false),
        Command::Game(c) => (cmd_game(&load(c)?)?, &c.out, false),
        Command::Sweep { common, format } => (cmd_sweep(&load(common)?)?, &common.out, matches!(format, Format::Csv)),
    };
    let text = if csv { sweep_csv(&record)? } else { record.to_toml() };
    emit(out, &text)?;
    Ok(ExitStatus::of(&record))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("qrflab: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
