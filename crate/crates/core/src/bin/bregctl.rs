use std::path::PathBuf;
use std::process::ExitCode;

use bregman_control::cli::{self, Command, Invocation};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bregctl", version, about = "Bregman-cost controller synthesis, simulation and verification")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search or validate M and write a certificate.
    Synthesize(Common),
    /// Run seeded rollouts and write trajectory CSVs plus a summary.
    Simulate(Common),
    /// Run the property suite against a certificate.
    Verify(Common),
    /// Simulate alongside the LQR baseline on common random numbers.
    Compare(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON or TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $BREGCTL_OUT_DIR, then ./bregctl-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    seed_offset: i64,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, common) = match args.command {
        Cmd::Synthesize(c) => (Command::Synthesize, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Compare(c) => (Command::Compare, c),
    };
    cli::run(command, &Invocation { config: common.config, out: common.out, seed_offset: common.seed_offset })
}
