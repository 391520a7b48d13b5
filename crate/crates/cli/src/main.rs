//! `covert-skg`: reproducible experiments over the covert key generation library.
//!
//! Exit codes: 0 success, 1 i/o, 3 parse, 4 precondition, 5 size guard, 6 verdict.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "covert-skg", version, about = "Covert secret key generation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Achievable and converse rate curves over a state-fraction grid.
    Rates,
    /// End-to-end protocol trials: JSON-lines records and a summary CSV.
    Simulate,
    /// Reciprocal Bernoulli-sum bounds against Monte-Carlo frequencies.
    VerifyLemma1,
    /// One-shot reliability and secrecy bounds against exact codebook averages.
    VerifyOneshot,
    /// State-fraction estimator deviation and halting bounds.
    EstimateBeta,
    /// Search a seeded code family for a small subset that works for every state sequence.
    Derandomize,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Opts {
    /// Run config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Channel spec (TOML); overrides the config. The built-in binary example when neither is given.
    #[arg(long, global = true)]
    pub channel: Option<PathBuf>,
    /// Master seed; required by every command except `rates`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of grid points.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Trials, samples or codebook draws, depending on the command.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub pairing: Option<PairingArg>,
    /// Test hook: multiplies every bound before the verdict.
    #[arg(long, global = true, hide = true, default_value_t = 1.0)]
    pub bound_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Oracle,
    Estimated,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Derived,
    AsStated,
    Both,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.opts.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    let ctx = commands::Context::new(&cli.opts, cfg)?;
    match cli.command {
        Command::Rates => commands::rates(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::VerifyLemma1 => commands::verify_lemma1(&ctx),
        Command::VerifyOneshot => commands::verify_oneshot(&ctx),
        Command::EstimateBeta => commands::estimate_beta(&ctx),
        Command::Derandomize => commands::derandomize(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(Failure::Parse(String::new()).exit_code());
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
