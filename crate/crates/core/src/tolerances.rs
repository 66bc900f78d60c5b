//! Numerical tolerances shared across modules.
//!
//! Residual checks are relative: `|lhs − rhs| / max(1, |rhs|)`.

use serde::{Deserialize, Serialize};

/// Stationarity residual at which numeric conjugation stops.
pub const TOL_DUAL: f64 = 1e-9;
/// Riccati-like identity residual.
pub const TOL_RICCATI: f64 = 1e-6;
/// KKT stationarity residual at the synthesized feedback.
pub const TOL_KKT: f64 = 1e-6;
/// Bellman fixed-point residual `|min_u[r(u) + p(Ax+Bu)] − xᵀMx|`.
pub const TOL_BELLMAN: f64 = 1e-6;
/// Lyapunov identity residual along rollouts.
pub const TOL_LYAPUNOV: f64 = 1e-6;
/// Smallest eigenvalue slack accepted by `search_m`.
pub const MARGIN_FLOOR: f64 = 1e-8;
/// Relative bisection tolerance on the scalar `m` search.
pub const TOL_BISECTION: f64 = 1e-6;
/// Fixed-point iteration budget for the DARE.
pub const MAX_DARE_ITER: usize = 100_000;
/// Fixed-point residual bound for the DARE, relative to `1 + ‖K‖_F`.
pub const TOL_DARE: f64 = 1e-10;

/// Tolerance bundle carried by certificates and overridable from configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub riccati: f64,
    pub kkt: f64,
    pub bellman: f64,
    pub lyapunov: f64,
    pub margin_floor: f64,
    pub dual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            riccati: TOL_RICCATI,
            kkt: TOL_KKT,
            bellman: TOL_BELLMAN,
            lyapunov: TOL_LYAPUNOV,
            margin_floor: MARGIN_FLOOR,
            dual: TOL_DUAL,
        }
    }
}

/// `|a − b| / max(1, |b|)`.
pub fn relative_residual(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
