use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::Ctx;
use config::RunConfig;
use output::Format;

/// Twin-field QKD key rates, session simulation and fiber vibration sensing.
#[derive(Debug, Parser)]
#[command(name = "tfqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Sectioned TOML configuration; absent sections use the 658.7 km defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for sampling, pairing and search (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output encoding [default: csv].
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Secure key rate from raw inputs or a simulated session.
    Keyrate,
    /// Per-setting tallies of a session, in expectation or sampled.
    Simulate,
    /// Key rate and PLOB bounds against distance.
    Curve,
    /// Search source parameters maximizing the key rate.
    Optimize,
    /// Vibration traces, recovered waveform and source localization.
    Sense,
    /// Repeaterless bound for given losses or transmittances.
    Plob {
        /// Channel loss in dB (repeatable).
        #[arg(long)]
        loss_db: Vec<f64>,
        /// Channel transmittance (repeatable).
        #[arg(long)]
        eta: Vec<f64>,
    },
}

fn run(cli: &Cli) -> Result<(), error::CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        cfg: &cfg,
        seed: cli.seed.or(cfg.seed).unwrap_or(1),
        format: cli.format.or(cfg.format).unwrap_or(Format::Csv),
        out: cli.out.as_deref().or(cfg.out.as_deref()),
    };
    match &cli.command {
        Command::Keyrate => commands::keyrate(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Curve => commands::curve(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::Sense => commands::sense(&ctx),
        Command::Plob { loss_db, eta } => commands::plob(&ctx, loss_db, eta),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tfqkd: {e}");
            e.exit_code()
        }
    }
}
