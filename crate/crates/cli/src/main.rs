//! One binary, seven verification pipelines. Every run writes a
//! machine-readable envelope under `<out>/<command>/<config-hash>/` and
//! exits 0 (all criteria pass), 1 (some criterion failed), or 2 (usage or
//! configuration error).

mod commands;
mod config;
mod envelope;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use envelope::RunDir;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "oscwalk",
    about = "Oscillating random walks: crossing chains, renewal operators, and skew-Brownian limit checks",
    version
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for Monte Carlo estimators (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output root directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces run.seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the standing hypotheses on the step-law pair.
    Check,
    /// Ladder laws, renewal potentials, and the limit constants.
    Ladder,
    /// Crossing kernel, invariant measure, and the skew parameter.
    Kernel,
    /// First-passage asymptotics and upper-bound diagnostics.
    VerifyFluctuations,
    /// Time-resolved crossing operators and the renewal limit.
    VerifyOperators,
    /// Path samples plus law-of-large-numbers / recurrence diagnostics.
    Simulate,
    /// Monte Carlo marginals against the skew-Brownian limit laws.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Ladder => "ladder",
            Command::Kernel => "kernel",
            Command::VerifyFluctuations => "verify_fluctuations",
            Command::VerifyOperators => "verify_operators",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let path = cli
        .config
        .ok_or_else(|| anyhow!("--config <path> is required"))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed_override {
        cfg.run.seed = seed;
    }
    if cli.workers > 0 {
        cfg.run.workers = cli.workers;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.display().to_string();
    }

    let out_root = PathBuf::from(&cfg.output.directory);
    let dir = RunDir::create(&out_root, cli.command.name(), &cfg)?;
    let mut envelope = match cli.command {
        Command::Check => commands::cmd_check(&cfg, &dir)?,
        Command::Ladder => commands::cmd_ladder(&cfg, &dir)?,
        Command::Kernel => commands::cmd_kernel(&cfg, &dir)?,
        Command::VerifyFluctuations => commands::cmd_verify_fluctuations(&cfg, &dir)?,
        Command::VerifyOperators => commands::cmd_verify_operators(&cfg, &dir)?,
        Command::Simulate => commands::cmd_simulate(&cfg, &dir)?,
        Command::Compare => commands::cmd_compare(&cfg, &dir)?,
    };
    envelope.finalize_status();
    let summary = dir.write_envelope(&envelope)?;
    println!("{}", summary.display());
    for c in &envelope.criteria {
        println!(
            "  {} {}: {:.6e} (threshold {:.3e})",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    Ok(if envelope.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
