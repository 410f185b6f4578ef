//! `mi-audit`: theory curves, simulated membership games, canary ranking,
//! white-box audits and overlay plots. Every output is a function of the
//! config (or arguments and input files) and the seed.

mod cmd;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "mi-audit", version, about = "Membership-inference leakage audits")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "MI_AUDIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal trade-off curve and GDP profile.
    Theory {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Play a fixed-target game and write transcripts, ROC and summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `rounds`.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Rank candidate canaries by estimated Mahalanobis score.
    Canary(cmd::canary::CanaryArgs),
    /// White-box covariance and scalar attacks on a toy SGD model.
    Whitebox {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Example pool CSV (features, then label); blobs are generated otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `repetitions`.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Overlay empirical ROC and theory curves in one SVG.
    Report(cmd::report::ReportArgs),
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Theory { config, out } => cmd::theory::run(&io::load_config(&config, &[])?, &out),
        Command::Simulate { config, out, seed, rounds } => {
            let overrides = [("master_seed", seed.map(|v| json!(v))), ("rounds", rounds.map(|v| json!(v)))];
            cmd::simulate::run(&io::load_config(&config, &overrides)?, &out)
        }
        Command::Canary(args) => cmd::canary::run(&args),
        Command::Whitebox { config, out, data, seed, repetitions } => {
            let overrides =
                [("master_seed", seed.map(|v| json!(v))), ("repetitions", repetitions.map(|v| json!(v)))];
            cmd::whitebox::run(&io::load_config(&config, &overrides)?, data.as_deref(), &out)
        }
        Command::Report(args) => cmd::report::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
