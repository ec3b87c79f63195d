//! `capdelay`: capacity-delay sweeps, capacity tables, delay CDFs,
//! equilibrium reports and the Monte Carlo validation suite.

mod commands;
mod config;
mod error;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Outcome};
use config::RunConfig;
use error::CliError;
use output::Format;

#[derive(Debug, Parser)]
#[command(name = "capdelay", version, about = "Capacity-delay analysis of secondary traffic in multi-band cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML scenario file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Add simulated columns and checks (delay-cdf).
    #[arg(long, global = true)]
    validate: bool,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Mean delay against a swept parameter, with the delay-optimal target rate.
    Tradeoff,
    /// Maximum capacity tables in both bandwidth modes.
    Capacity,
    /// Delay CDF from the inverted transform.
    DelayCdf,
    /// Per-band equilibrium at the configured target rate.
    Equilibrium,
    /// Monte Carlo checks of every approximation.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Tradeoff => "tradeoff",
            Command::Capacity => "capacity",
            Command::DelayCdf => "delay-cdf",
            Command::Equilibrium => "equilibrium",
            Command::Validate => "validate",
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.validate && !matches!(cli.command, Command::DelayCdf | Command::Validate) {
        return Err(CliError::Config("--validate applies to delay-cdf only".into()));
    }
    if cli.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let ctx = Context {
        command: cli.command.name(),
        cfg,
        validate: cli.validate || matches!(cli.command, Command::Validate),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Tradeoff => commands::tradeoff(&ctx),
        Command::Capacity => commands::capacity(&ctx),
        Command::DelayCdf => commands::delay_cdf_cmd(&ctx),
        Command::Equilibrium => commands::equilibrium(&ctx),
        Command::Validate => commands::validate(&ctx),
    })
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<(), CliError> {
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    outcome.table.write(&mut out, cli.format)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return CliError::Config(String::new()).exit_code();
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Err(e) = emit(&cli, &outcome) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match outcome.failure {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
