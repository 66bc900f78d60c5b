//! Bregman divergences and the expectation decomposition used in the
//! stochastic Bellman argument.

use std::sync::Arc;

use super::{ConvexError, ConvexFunction, CostFn, DualFunction, DualOptions, Result, Sum, Vector};
use crate::system::NoiseModel;

/// `D_φ(x, y) = φ(x) − φ(y) − ∇φ(y)ᵀ(x − y)`.
pub fn eval_bregman(phi: &dyn ConvexFunction, x: &Vector, y: &Vector) -> Result<f64> {
    super::check_dim(phi.dim(), x)?;
    super::check_dim(phi.dim(), y)?;
    for p in [x, y] {
        if !phi.in_domain(p) {
            return Err(ConvexError::Domain { function: phi.name(), point: p.iter().copied().collect() });
        }
    }
    let g = phi.gradient(y)?;
    Ok(phi.value(x)? - phi.value(y)? - g.dot(&(x - y)))
}

/// `D(x,y) − D(x,z) − D(z,y) + (∇φ(y) − ∇φ(z))ᵀ(x − z)`, zero in exact arithmetic.
pub fn law_of_cosines_residual(phi: &dyn ConvexFunction, x: &Vector, y: &Vector, z: &Vector) -> Result<f64> {
    let cross = (phi.gradient(y)? - phi.gradient(z)?).dot(&(x - z));
    Ok(eval_bregman(phi, x, y)? - eval_bregman(phi, x, z)? - eval_bregman(phi, z, y)? + cross)
}

/// Both sides of `D₁(x,y) + D₂(x,z) = D₁₊₂(x,x*) + D₁(x*,y) + D₂(x*,z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    /// Solves `∇(φ₁+φ₂)(x*) = ∇φ₁(y) + ∇φ₂(z)`.
    pub x_star: Vector,
    pub lhs: f64,
    pub rhs: f64,
}

/// The identity is only as accurate as `x*`, so the inversion runs tighter
/// than the default dual tolerance.
const COMPLETION_TOL: f64 = 1e-13;

pub fn completion_of_squares(phi1: &CostFn, phi2: &CostFn, x: &Vector, y: &Vector, z: &Vector) -> Result<CompletionReport> {
    let sum: CostFn = Arc::new(Sum::new(vec![phi1.clone(), phi2.clone()]));
    let target = phi1.gradient(y)? + phi2.gradient(z)?;
    let opts = DualOptions { tol: COMPLETION_TOL, ..DualOptions::default() };
    let x_star = DualFunction::numeric(sum.clone()).with_options(opts).gradient(&target)?;
    let lhs = eval_bregman(phi1.as_ref(), x, y)? + eval_bregman(phi2.as_ref(), x, z)?;
    let rhs = eval_bregman(sum.as_ref(), x, &x_star)?
        + eval_bregman(phi1.as_ref(), &x_star, y)?
        + eval_bregman(phi2.as_ref(), &x_star, z)?;
    Ok(CompletionReport { x_star, lhs, rhs })
}

/// Monte-Carlo estimates of both sides of `E[D_q(z, −w)] = q(z) + E[D_q(0, −w)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `E[D_q(0, −w)]`, independent of `z`.
    pub constant: f64,
    /// Standard error of the paired difference `lhs − rhs`.
    pub std_error: f64,
    pub residual: f64,
}

pub fn expectation_decomposition_check(
    q: &dyn ConvexFunction,
    noise: &NoiseModel,
    z: &Vector,
    samples: usize,
    seed: u64,
) -> Result<ExpectationReport> {
    if samples < 1000 {
        return Err(ConvexError::TooFewSamples(samples));
    }
    let zero = Vector::zeros(z.len());
    let qz = q.value(z)?;
    let (mut sum_l, mut sum_c, mut sum_d, mut sum_d2) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..samples {
        let w = -noise.sample(seed, k as u64);
        let l = eval_bregman(q, z, &w)?;
        let c = eval_bregman(q, &zero, &w)?;
        let d = l - c - qz;
        sum_l += l;
        sum_c += c;
        sum_d += d;
        sum_d2 += d * d;
    }
    let n = samples as f64;
    let mean_d = sum_d / n;
    let var_d = ((sum_d2 - n * mean_d * mean_d) / (n - 1.0)).max(0.0);
    let lhs = sum_l / n;
    let constant = sum_c / n;
    let rhs = qz + constant;
    Ok(ExpectationReport { lhs, rhs, constant, std_error: (var_d / n).sqrt(), residual: (lhs - rhs).abs() })
}
