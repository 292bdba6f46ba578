//! `riskgrowth`: solve, verify, diagnose and sweep risk-sensitive growth
//! problems described by a JSON run configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "riskgrowth",
    version,
    about = "Long-run risk-sensitive portfolio growth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and RISKGROWTH_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for all sampling; overrides the config and RISKGROWTH_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Relative value iteration: growth rate, value function and policy.
    Solve,
    /// Solve, then compare against Monte Carlo estimates.
    Verify,
    /// Contraction certificate, minorization and growth-bound checks.
    Diagnose,
    /// Solve over the configured list of risk parameters.
    Sweep,
}

pub enum Failure {
    Config(config::ConfigError),
    Runtime(String),
    Verification(String),
    NotConverged(String),
    Certificate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) | Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Certificate(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("config error: {e}"),
            Failure::Runtime(m) => format!("error: {m}"),
            Failure::Verification(m) => format!("verification failed: {m}"),
            Failure::NotConverged(m) => format!("not converged: {m}"),
            Failure::Certificate(m) => format!("certificate failure: {m}"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Failure::Config(config::ConfigError("--config <path> is required".into()))
    })?;
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        format: cli.format,
    };
    let cfg = RunConfig::load(path, &overrides).map_err(Failure::Config)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config(config::ConfigError(
                "--threads must be at least 1".into(),
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Solve => commands::cmd_solve(&cfg),
        Command::Verify => commands::cmd_verify(&cfg),
        Command::Diagnose => commands::cmd_diagnose(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
