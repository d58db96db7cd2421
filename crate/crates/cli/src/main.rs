use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dualmp_cli::{commands, Exit, RunConfig};

/// Radial ground states of quasilinear Schrödinger equations.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the exponent hypotheses for the configured V, K and g.
    Check(Common),
    /// Compute a mountain-pass solution.
    Solve(Common),
    /// Check a computed solution against the residual thresholds.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Solution profile; defaults to <out>/u.csv.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Fit the embedding decay rates at 0 and at infinity.
    Rates(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the solver and rate samplers; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Solve even when the hypotheses fail.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
        }
        let mut config = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        if let Some(seed) = self.seed {
            config.set_seed(seed);
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<Exit> {
    match cli.command {
        Command::Check(c) => commands::cmd_check(&c.load()?),
        Command::Solve(c) => commands::cmd_solve(&c.load()?, c.force),
        Command::Verify { common, solution } => commands::cmd_verify(&common.load()?, solution.as_deref()),
        Command::Rates(c) => commands::cmd_rates(&c.load()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Exit::Error as u8)
        }
    }
}
