//! Companion-cost derivation from the Riccati-like identity.

use std::sync::Arc;

use super::feasibility::{convexity_verdict, m_inverse, state_first_dual};
use super::{validate_m, GridSpec, Result, SynthesisError};
use crate::convex::{
    add_quadratic, CostFn, CostSpec, DualFunction, NumericConjugate, Quadratic, RiccatiDual, ShiftedByQuadratic,
};
use crate::linalg::{self, Matrix};
use crate::system::LinearSystem;

fn catalog_weight(f: &CostFn) -> Option<Matrix> {
    match f.spec()? {
        CostSpec::Quadratic { weight } => linalg::from_rows(&weight),
        _ => None,
    }
}

fn require_pd(name: &str, m: &Matrix) -> Result<()> {
    let e = linalg::min_eigenvalue(m);
    if e > 0.0 {
        Ok(())
    } else {
        Err(SynthesisError::InfeasibleDerivation { function: name.into(), worst: e, at: vec![] })
    }
}

/// `r = r̃**` for a fixed state cost `q` (square `B` only).
///
/// Quadratic `q = xᵀQx` gives `r = uᵀS⁻¹u` with
/// `S = B†(AM⁻¹Aᵀ − (Q + M)⁻¹)B†ᵀ`; everything else is conjugated
/// numerically after checking that `r̃*` is convex and positive on the
/// convexity grid.
pub fn derive_r_from_q(system: &LinearSystem, q: &CostFn, m: &Matrix, grid: &GridSpec) -> Result<CostFn> {
    let n = system.state_dim();
    if system.input_dim() != n {
        return Err(SynthesisError::Unsupported(format!(
            "deriving r needs a square B (m = {}, n = {n})",
            system.input_dim()
        )));
    }
    validate_m(m, n)?;
    if let Some(w) = catalog_weight(q) {
        let k_inv = (w + m).try_inverse().ok_or(SynthesisError::InvalidM)?;
        let b_pinv = linalg::pinv(&system.b);
        let s = linalg::symmetrize(
            &(&b_pinv * (&system.a * m_inverse(m)? * system.a.transpose() - k_inv) * b_pinv.transpose()),
        );
        require_pd("r", &s)?;
        let weight = s.try_inverse().ok_or(SynthesisError::InvalidM)?;
        return Ok(Arc::new(Quadratic::new(linalg::symmetrize(&weight))?));
    }
    let r_dual: CostFn = Arc::new(state_first_dual(system, q, m)?);
    let verdict = convexity_verdict(&r_dual, grid)?;
    if !verdict.convex || !verdict.positive {
        return Err(SynthesisError::InfeasibleDerivation {
            function: "r̃*".into(),
            worst: verdict.worst_curvature.min(verdict.min_value),
            at: verdict.worst_curvature_at,
        });
    }
    Ok(Arc::new(NumericConjugate::new(r_dual)))
}

/// `(q, p)` for a fixed control cost `r`: `p = (p*)*` with
/// `p*(ξ) = −r*(Bᵀξ) + ¼ξᵀAM⁻¹Aᵀξ`, and `q = p − xᵀMx`.
pub fn derive_q_from_r(system: &LinearSystem, r: &CostFn, m: &Matrix, grid: &GridSpec) -> Result<(CostFn, CostFn)> {
    let n = system.state_dim();
    if r.dim() != system.input_dim() {
        return Err(SynthesisError::Dimension(format!("r has dimension {}, B has {} columns", r.dim(), system.input_dim())));
    }
    validate_m(m, n)?;
    let am_a = &system.a * m_inverse(m)? * system.a.transpose();
    if let Some(w) = catalog_weight(r) {
        let r_inv = w.try_inverse().ok_or(SynthesisError::InvalidM)?;
        let t = linalg::symmetrize(&(&am_a - &system.b * r_inv * system.b.transpose()));
        require_pd("p", &t)?;
        let p_weight = linalg::symmetrize(&t.try_inverse().ok_or(SynthesisError::InvalidM)?);
        let q_weight = &p_weight - m;
        let e = linalg::min_eigenvalue(&q_weight);
        if e < -1e-12 {
            return Err(SynthesisError::InfeasibleDerivation { function: "q".into(), worst: e, at: vec![] });
        }
        let q: CostFn = Arc::new(Quadratic::new(linalg::symmetrize(&q_weight))?);
        let p = add_quadratic(&q, m)?;
        return Ok((q, p));
    }
    let p_dual: CostFn = Arc::new(RiccatiDual::new(DualFunction::new(r.clone()), system.b.transpose(), am_a));
    let p: CostFn = Arc::new(NumericConjugate::new(p_dual));
    let q: CostFn = Arc::new(ShiftedByQuadratic::new(p.clone(), -m));
    let verdict = convexity_verdict(&q, grid)?;
    if !verdict.convex || !verdict.positive {
        return Err(SynthesisError::InfeasibleDerivation {
            function: "q".into(),
            worst: verdict.worst_curvature.min(verdict.min_value),
            at: verdict.worst_curvature_at,
        });
    }
    Ok((q, p))
}
