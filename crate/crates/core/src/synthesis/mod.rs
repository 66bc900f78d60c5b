//! Value-function synthesis: feasibility of `M`, derivation of the companion
//! cost, the optimal feedback law and the consistency checks that certify
//! them.
//!
//! Two design routes are supported. In *state-cost-first* mode the designer
//! fixes `q`; `M` must satisfy `M − ½AᵀMA ⪯ ½Aᵀ∇²q(x)A` and the control
//! cost is recovered as `r = r̃**` with
//! `r̃*(η) = −p*((Bᵀ)†η) + ¼ηᵀB†AM⁻¹Aᵀ(Bᵀ)†η`. In *control-cost-first*
//! mode `r` is fixed and `p*(ξ) = −r*(Bᵀξ) + ¼ξᵀAM⁻¹Aᵀξ`, `q = p − xᵀMx`.
//! Either way the resulting triple satisfies
//! `p*(ξ) + r*(Bᵀξ) = ¼ξᵀAM⁻¹Aᵀξ` and the optimal input is
//! `u = ∇r*(−2BᵀA⁻ᵀMx)`.

mod certificate;
mod checks;
mod controller;
mod derive;
mod feasibility;
mod grid;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{ConvexError, CostFn};

pub use certificate::{CertificateParams, SynthesisCertificate};
pub use checks::{
    bellman_fixed_point_check, kkt_residual, lyapunov_residual, riccati_residual, verify_certificate,
    Property, PropertyResult, VerificationReport,
};
pub use controller::{build_controller, Controller, FeedbackLaw};
pub use derive::{derive_q_from_r, derive_r_from_q};
pub use feasibility::{check_m_given_q, check_m_given_r, convexity_verdict, ConvexityVerdict, FeasibilityReport, Route};
pub use grid::GridSpec;
pub use search::{search_m, Objective, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    StateCostFirst,
    ControlCostFirst,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("A is not invertible")]
    SingularA,
    #[error("M must be symmetric positive definite")]
    InvalidM,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} is not even")]
    NotEven(String),
    #[error("insufficient hypotheses: {0}")]
    InsufficientHypotheses(String),
    #[error("derived {function} is not convex and positive on the grid (worst violation {worst:e} at {at:?})")]
    InfeasibleDerivation { function: String, worst: f64, at: Vec<f64> },
    #[error("no feasible M found (best margin {best_margin:e} at {best_m:?})")]
    Infeasible { best_margin: f64, best_m: Vec<Vec<f64>> },
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

/// The cost functions attached to a certificate: `p = q + xᵀMx`.
#[derive(Debug, Clone)]
pub struct CostTriple {
    pub q: CostFn,
    pub r: CostFn,
    pub p: CostFn,
}

pub(crate) fn validate_m(m: &crate::linalg::Matrix, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(SynthesisError::Dimension(format!("M is {:?}, expected {n}×{n}", m.shape())));
    }
    if !crate::linalg::is_symmetric(m, 1e-12) || !crate::linalg::is_positive_definite(m) {
        return Err(SynthesisError::InvalidM);
    }
    Ok(())
}

/// `φ(x) = φ(−x)` on the given samples, to relative precision 1e-9.
pub(crate) fn assert_even(f: &CostFn, samples: &[crate::linalg::Vector]) -> Result<()> {
    for x in samples.iter().step_by((samples.len() / 50).max(1)) {
        let a = f.value(x)?;
        let b = f.value(&-x)?;
        if a.is_finite() != b.is_finite() || (a.is_finite() && (a - b).abs() > 1e-9 * (1.0 + a.abs())) {
            return Err(SynthesisError::NotEven(f.name()));
        }
    }
    Ok(())
}
