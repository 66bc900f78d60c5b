//! Seeded closed-loop rollouts, cost accounting, Lyapunov monitoring and a
//! brute-force value-iteration oracle for scalar problems.

mod cost;
mod csv_out;
mod oracle;
mod rollout;

use thiserror::Error;

use crate::convex::ConvexError;
use crate::synthesis::SynthesisError;

pub use cost::{evaluate_cost, lyapunov_monitor, CostReport, LyapunovReport};
pub use csv_out::{trajectory_csv, write_trajectory_csv};
pub use oracle::{gauss_hermite, value_iteration_oracle, OracleOptions, OracleSolution};
pub use rollout::{rollout, Trajectory, RNG_NAME};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("controller failed at step {step}: {source}")]
    Controller { step: usize, source: SynthesisError },
    #[error("malformed trajectory: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("value iteration did not converge after {sweeps} sweeps (last change {delta:e})")]
    NotConverged { sweeps: usize, delta: f64 },
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
