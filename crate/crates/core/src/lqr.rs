//! Discrete algebraic Riccati equation and the LQR baseline.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::tolerances::{MAX_DARE_ITER, TOL_DARE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("R + BᵀKB became singular")]
    Singular,
    #[error("Riccati iteration did not converge in {iterations} iterations (last change {residual:e})")]
    Divergence { iterations: usize, residual: f64 },
}

/// Solution of `K = Q + AᵀKA − AᵀKB(R + BᵀKB)⁻¹BᵀKA` with gain
/// `F = (R + BᵀKB)⁻¹BᵀKA`, so the optimal input is `u = −Fx`.
#[derive(Debug, Clone)]
pub struct LqrSolution {
    pub k: Matrix,
    pub gain: Matrix,
    pub iterations: usize,
}

fn riccati_map(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, k: &Matrix) -> Result<(Matrix, Matrix), LqrError> {
    let bt_k = b.transpose() * k;
    let s = r + &bt_k * b;
    let chol = s.cholesky().ok_or(LqrError::Singular)?;
    let gain = chol.solve(&(&bt_k * a));
    let next = q + a.transpose() * k * a - a.transpose() * k * b * &gain;
    Ok((crate::linalg::symmetrize(&next), gain))
}

/// Fixed-point iteration from `K₀ = Q`.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<LqrSolution, LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LqrError::Dimension(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let mut k = q.clone();
    let mut change = f64::INFINITY;
    for it in 1..=MAX_DARE_ITER {
        let (next, _) = riccati_map(a, b, q, r, &k)?;
        if !next.iter().all(|v| v.is_finite() && v.abs() < 1e100) {
            return Err(LqrError::Divergence { iterations: it, residual: f64::INFINITY });
        }
        change = (&next - &k).norm();
        k = next;
        if change <= TOL_DARE * (1.0 + k.norm()) {
            k = polish(a, b, q, r, k, change)?;
            let (_, gain) = riccati_map(a, b, q, r, &k)?;
            if crate::linalg::spectral_radius(&(a - b * &gain)) >= 1.0 {
                return Err(LqrError::Divergence { iterations: it, residual: change });
            }
            return Ok(LqrSolution { k, gain, iterations: it });
        }
    }
    Err(LqrError::Divergence { iterations: MAX_DARE_ITER, residual: change })
}

/// Keeps iterating past the stopping rule and returns the iterate with the
/// smallest residual. Convergence can oscillate, so a single larger step is
/// not taken as stagnation.
fn polish(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, k: Matrix, change: f64) -> Result<Matrix, LqrError> {
    const PATIENCE: usize = 50;
    let mut best = (k.clone(), change);
    let mut k = k;
    let mut stale = 0;
    for _ in 0..MAX_DARE_ITER {
        let (next, _) = riccati_map(a, b, q, r, &k)?;
        let step = (&next - &k).norm();
        if step < best.1 {
            best = (k.clone(), step);
            stale = 0;
        } else {
            stale += 1;
        }
        if step <= f64::EPSILON * (1.0 + k.norm()) || stale >= PATIENCE {
            break;
        }
        k = next;
    }
    Ok(best.0)
}

/// `F = (BᵀKB + R)⁻¹BᵀKA`.
pub fn lqr_gain(a: &Matrix, b: &Matrix, k: &Matrix, r: &Matrix) -> Result<Matrix, LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n || k.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LqrError::Dimension(format!("B {:?}, K {:?}, R {:?}", b.shape(), k.shape(), r.shape())));
    }
    let bt_k = b.transpose() * k;
    let s = r + &bt_k * b;
    s.lu().solve(&(&bt_k * a)).ok_or(LqrError::Singular)
}

/// `‖K − Ric(K)‖_F`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, k: &Matrix) -> Result<f64, LqrError> {
    let (next, _) = riccati_map(a, b, q, r, k)?;
    Ok((next - k).norm())
}
