//! Config-driven commands behind the `bregctl` binary.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 infeasible synthesis,
//! 3 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

pub use commands::{cmd_compare, cmd_simulate, cmd_synthesize, cmd_verify, load_certificate, SimulationSummary};
pub use config::{
    CostConfig, CostMode, FamilyConfig, Format, NoiseConfig, OutputConfig, RunConfig, SimulationConfig, SynthesisConfig,
    SystemConfig, VerificationConfig,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BREGCTL_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "bregctl-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Runtime(_) => 1,
            Self::Infeasible(_) => 2,
            Self::Verification(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed_offset: i64,
}

impl Invocation {
    /// `--out`, then `output.directory`, then the environment, then a default.
    pub fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.directory.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synthesize,
    Simulate,
    Verify,
    Compare,
}

/// Runs one command, printing its summary to stdout and errors to stderr.
pub fn run(command: Command, inv: &Invocation) -> ExitCode {
    let result = RunConfig::load(&inv.config).and_then(|cfg| {
        let mut stdout = std::io::stdout().lock();
        match command {
            Command::Synthesize => cmd_synthesize(&cfg, inv, &mut stdout),
            Command::Simulate => cmd_simulate(&cfg, inv, &mut stdout).map(|_| ()),
            Command::Verify => cmd_verify(&cfg, inv, &mut stdout),
            Command::Compare => cmd_compare(&cfg, inv, &mut stdout).map(|_| ()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bregctl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
