//! Grid checks of the matrix inequalities that make a candidate `M` feasible.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{assert_even, validate_m, GridSpec, Result, SynthesisError};
use crate::convex::{add_quadratic, CostFn, DualFunction, RiccatiDual};
use crate::linalg::{self, Matrix, Vector};
use crate::system::LinearSystem;
use crate::tolerances::MARGIN_FLOOR;

/// Which sufficient condition certifies a fixed control cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Stable `A` → curvature sandwich, otherwise quadratic bounds.
    #[default]
    Auto,
    /// `½(AM⁻¹Aᵀ − M⁻¹) ⪯ B∇²r*(Bᵀξ)Bᵀ ⪯ ½AM⁻¹Aᵀ`, valid for stable `A`.
    Curvature,
    /// `U ⪯ ¼AM⁻¹Aᵀ ⪯ L + M⁻¹` with `ξᵀLξ ≤ r*(Bᵀξ) ≤ ξᵀUξ`.
    QuadraticBounds,
}

/// Direct second-difference test of a derived scalar function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub convex: bool,
    pub positive: bool,
    /// Smallest normalized second difference (or Hessian eigenvalue).
    pub worst_curvature: f64,
    pub worst_curvature_at: Vec<f64>,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub route: Option<Route>,
    /// Smallest eigenvalue slack of each inequality over the grid.
    pub margins: BTreeMap<String, f64>,
    /// Grid points where a Hessian was unavailable (kinks) and were skipped.
    pub skipped: usize,
    pub numeric_convexity: Option<ConvexityVerdict>,
    /// Scalar quadratic bounds `(l, u)` estimated for the bounds route.
    pub quadratic_bounds: Option<(f64, f64)>,
}

impl FeasibilityReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.values().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Smallest eigenvalue over the grid of each matrix produced by `slacks`,
/// or `None` at points where the Hessian does not exist.
fn grid_minima<F>(samples: &[Vector], count: usize, slacks: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&Vector) -> Result<Option<Vec<Matrix>>> + Sync,
{
    let per_point: Vec<Option<Vec<f64>>> = samples
        .par_iter()
        .map(|x| Ok(slacks(x)?.map(|ms| ms.iter().map(linalg::min_eigenvalue).collect())))
        .collect::<Result<_>>()?;
    let mut minima = vec![f64::INFINITY; count];
    let mut skipped = 0;
    for p in per_point {
        match p {
            Some(v) => {
                for (m, e) in minima.iter_mut().zip(v) {
                    *m = m.min(e);
                }
            }
            None => skipped += 1,
        }
    }
    Ok((minima, skipped))
}

pub(crate) fn m_inverse(m: &Matrix) -> Result<Matrix> {
    m.clone().try_inverse().map(|i| linalg::symmetrize(&i)).ok_or(SynthesisError::InvalidM)
}

/// `r̃*` for a fixed state cost.
pub(crate) fn state_first_dual(system: &LinearSystem, q: &CostFn, m: &Matrix) -> Result<RiccatiDual> {
    let p = add_quadratic(q, m)?;
    let bt_pinv = linalg::pinv(&system.b.transpose());
    let b_pinv = linalg::pinv(&system.b);
    let quad = &b_pinv * &system.a * m_inverse(m)? * system.a.transpose() * &bt_pinv;
    Ok(RiccatiDual::new(DualFunction::new(p), bt_pinv, quad))
}

/// Second differences of a scalar function on `grid`, normalized by `h²`,
/// together with its minimum value.
pub(crate) fn scalar_convexity(f: &CostFn, grid: &[f64]) -> Result<ConvexityVerdict> {
    let values: Vec<f64> = grid.par_iter().map(|x| f.value_at(*x)).collect::<crate::convex::Result<_>>()?;
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut worst = f64::INFINITY;
    let mut worst_at = 0.0;
    for i in 1..grid.len() - 1 {
        let h = grid[i + 1] - grid[i];
        let d = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        if d < worst {
            worst = d;
            worst_at = grid[i];
        }
    }
    let h = grid[1] - grid[0];
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    // Round-off in a second difference is a few ulps of the values.
    let noise = 16.0 * f64::EPSILON * scale / (h * h);
    Ok(ConvexityVerdict {
        convex: worst >= -noise,
        positive: min_value >= -1e-12 * scale,
        worst_curvature: worst,
        worst_curvature_at: vec![worst_at],
        min_value,
    })
}

fn hessian_convexity(f: &CostFn, samples: &[Vector]) -> Result<ConvexityVerdict> {
    let evals: Vec<(f64, f64, Vec<f64>)> = samples
        .par_iter()
        .map(|x| {
            let v = f.value(x)?;
            let e = f.hessian(x).map(|h| linalg::min_eigenvalue(&h)).unwrap_or(f64::INFINITY);
            Ok((v, e, x.iter().copied().collect()))
        })
        .collect::<crate::convex::Result<_>>()?;
    let (mut worst, mut at, mut min_value) = (f64::INFINITY, vec![], f64::INFINITY);
    for (v, e, x) in evals {
        min_value = min_value.min(v);
        if e < worst {
            worst = e;
            at = x;
        }
    }
    Ok(ConvexityVerdict {
        convex: worst >= -1e-9,
        positive: min_value >= -1e-12,
        worst_curvature: worst,
        worst_curvature_at: at,
        min_value,
    })
}

/// Second-difference (scalar) or Hessian (matrix) convexity and positivity
/// test of `f` on the grid.
pub fn convexity_verdict(f: &CostFn, grid: &GridSpec) -> Result<ConvexityVerdict> {
    if f.dim() == 1 {
        scalar_convexity(f, &grid.convexity_grid())
    } else {
        let samples: Vec<Vector> = grid.samples(f.dim()).into_iter().step_by(10).collect();
        hessian_convexity(f, &samples)
    }
}

/// State-cost-first feasibility of `M` for a fixed `q`.
///
/// The verdict follows the matrix condition; the direct convexity test of
/// the derived `r̃*` is reported alongside it and may disagree (the matrix
/// condition is only sufficient).
pub fn check_m_given_q(system: &LinearSystem, q: &CostFn, m: &Matrix, grid: &GridSpec) -> Result<FeasibilityReport> {
    let n = system.state_dim();
    if system.input_dim() < n {
        return Err(SynthesisError::Unsupported(format!(
            "state-cost-first design needs m ≥ n (m = {}, n = {n})",
            system.input_dim()
        )));
    }
    validate_m(m, n)?;
    let samples = grid.samples(n);
    assert_even(q, &samples)?;
    let a = &system.a;
    let lhs = m - a.transpose() * m * a * 0.5;
    let (minima, skipped) = grid_minima(&samples, 1, |x| {
        Ok(q.hessian(x).map(|h| vec![a.transpose() * h * a * 0.5 - &lhs]))
    })?;
    let mut margins = BTreeMap::new();
    margins.insert("state_curvature".to_string(), minima[0]);
    let r_dual: CostFn = std::sync::Arc::new(state_first_dual(system, q, m)?);
    let verdict = convexity_verdict(&r_dual, grid)?;
    Ok(FeasibilityReport {
        feasible: minima[0].is_finite() && minima[0] >= 0.0,
        route: None,
        margins,
        skipped,
        numeric_convexity: Some(verdict),
        quadratic_bounds: None,
    })
}

/// Control-cost-first feasibility of `M` for a fixed `r`.
pub fn check_m_given_r(
    system: &LinearSystem,
    r: &CostFn,
    m: &Matrix,
    grid: &GridSpec,
    route: Route,
) -> Result<FeasibilityReport> {
    let n = system.state_dim();
    if r.dim() != system.input_dim() {
        return Err(SynthesisError::Dimension(format!("r has dimension {}, B has {} columns", r.dim(), system.input_dim())));
    }
    validate_m(m, n)?;
    let samples = grid.samples(n);
    assert_even(r, &grid.samples(r.dim()))?;
    let route = match route {
        Route::Auto if system.is_stable() => Route::Curvature,
        Route::Auto => Route::QuadraticBounds,
        other => other,
    };
    let a = &system.a;
    let b = &system.b;
    let m_inv = m_inverse(m)?;
    let am_a = a * &m_inv * a.transpose();
    let r_dual = DualFunction::new(r.clone());
    let mut margins = BTreeMap::new();
    let mut quadratic_bounds = None;
    let skipped;
    match route {
        Route::Curvature => {
            if !system.is_stable() {
                return Err(SynthesisError::InsufficientHypotheses(
                    "the curvature condition requires a stable A".into(),
                ));
            }
            let lower = (&am_a - &m_inv) * 0.5;
            let upper = &am_a * 0.5;
            let (minima, s) = grid_minima(&samples, 2, |xi| {
                Ok(r_dual.hessian(&(b.transpose() * xi)).map(|h| {
                    let bhb = b * h * b.transpose();
                    vec![&bhb - &lower, &upper - &bhb]
                }))
            })?;
            skipped = s;
            margins.insert("curvature_lower".to_string(), minima[0]);
            margins.insert("curvature_upper".to_string(), minima[1]);
        }
        Route::QuadraticBounds => {
            if r.bounded_domain() {
                return Err(SynthesisError::InsufficientHypotheses(
                    "r has a bounded domain, so r*(Bᵀξ) admits no positive quadratic lower bound".into(),
                ));
            }
            let ratios: Vec<f64> = samples
                .par_iter()
                .filter(|xi| xi.norm() > 0.0)
                .map(|xi| Ok(r_dual.value(&(b.transpose() * xi))? / xi.norm_squared()))
                .collect::<crate::convex::Result<_>>()?;
            let l = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let u = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(l > MARGIN_FLOOR) || !u.is_finite() {
                return Err(SynthesisError::InsufficientHypotheses(format!(
                    "no strongly convex, smooth quadratic bounds for r*(Bᵀξ) on the grid (l = {l:e}, u = {u:e})"
                )));
            }
            let ident = Matrix::identity(n, n);
            let quarter = &am_a * 0.25;
            margins.insert("bound_upper".to_string(), linalg::min_eigenvalue(&(&quarter - &ident * u)));
            margins.insert("bound_lower".to_string(), linalg::min_eigenvalue(&(&ident * l + &m_inv - &quarter)));
            quadratic_bounds = Some((l, u));
            skipped = 0;
        }
        Route::Auto => unreachable!(),
    }
    let feasible = margins.values().all(|v| v.is_finite() && *v >= 0.0);
    Ok(FeasibilityReport { feasible, route: Some(route), margins, skipped, numeric_convexity: None, quadratic_bounds })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::convex::{BoxedQuadratic, ElasticNet, Quadratic};

    fn scalar_system(a: f64, b: f64) -> LinearSystem {
        LinearSystem::deterministic(Matrix::from_element(1, 1, a), Matrix::from_element(1, 1, b)).unwrap()
    }

    fn s(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn elastic_net_scalar_reduction() {
        let sys = scalar_system(1.2, 1.0);
        let q: CostFn = Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap());
        let rep = check_m_given_q(&sys, &q, &s(0.01), &GridSpec::default()).unwrap();
        assert!(rep.feasible);
        // a²ε − m(1 − a²/2)
        assert!((rep.margins["state_curvature"] - (0.0144 - 0.0028)).abs() < 1e-12);
        assert_eq!(rep.skipped, 1);
        assert!(rep.numeric_convexity.unwrap().convex);

        let rep = check_m_given_q(&sys, &q, &s(0.07), &GridSpec::default()).unwrap();
        assert!(!rep.feasible);
        assert!((rep.margins["state_curvature"] - (0.0144 - 0.0196)).abs() < 1e-12);
        // a²(ε + m) > m, so the derived r̃* is still convex.
        assert!(rep.numeric_convexity.unwrap().convex);
    }

    #[test]
    fn numeric_verdict_detects_nonconvex_derivation() {
        // a²(ε + m) < m for a = 0.5, ε = 0.01, m = 0.2
        let sys = scalar_system(0.5, 1.0);
        let q: CostFn = Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap());
        let rep = check_m_given_q(&sys, &q, &s(0.2), &GridSpec::default()).unwrap();
        assert!(!rep.numeric_convexity.unwrap().convex);
    }

    #[test]
    fn quadratic_state_cost_binds_literally() {
        let sys = LinearSystem::deterministic(Matrix::identity(2, 2) * 0.5, Matrix::identity(2, 2)).unwrap();
        let q: CostFn = Arc::new(Quadratic::new(Matrix::identity(2, 2)).unwrap());
        let rep = check_m_given_q(&sys, &q, &Matrix::identity(2, 2), &GridSpec::default()).unwrap();
        assert!(!rep.feasible);
        assert!((rep.margins["state_curvature"] - (0.25 - 0.875)).abs() < 1e-12);
    }

    #[test]
    fn underactuated_is_unsupported() {
        let sys = LinearSystem::deterministic(Matrix::identity(2, 2), Matrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        let q: CostFn = Arc::new(Quadratic::new(Matrix::identity(2, 2)).unwrap());
        let r = check_m_given_q(&sys, &q, &Matrix::identity(2, 2), &GridSpec::default());
        assert!(matches!(r, Err(SynthesisError::Unsupported(_))));
    }

    #[test]
    fn curvature_route_examples() {
        // r(u) = ½u², B = I, A = ½I, M = I: upper bound ½·¼ − 1 < 0
        let sys = LinearSystem::deterministic(Matrix::identity(2, 2) * 0.5, Matrix::identity(2, 2)).unwrap();
        let r: CostFn = Arc::new(Quadratic::half_squared_norm(2));
        let rep = check_m_given_r(&sys, &r, &Matrix::identity(2, 2), &GridSpec::default(), Route::Auto).unwrap();
        assert_eq!(rep.route, Some(Route::Curvature));
        assert!(!rep.feasible);
        assert!((rep.margins["curvature_upper"] + 0.875).abs() < 1e-12);

        // r(u) = 2u², a = ½, b = 1: ∇²r* = ¼, feasible iff m ≤ ½
        let sys = scalar_system(0.5, 1.0);
        let r: CostFn = Arc::new(Quadratic::new(s(2.0)).unwrap());
        let grid = GridSpec::default();
        assert!(check_m_given_r(&sys, &r, &s(0.4), &grid, Route::Auto).unwrap().feasible);
        assert!(check_m_given_r(&sys, &r, &s(0.5), &grid, Route::Auto).unwrap().feasible);
        assert!(!check_m_given_r(&sys, &r, &s(0.6), &grid, Route::Auto).unwrap().feasible);
    }

    #[test]
    fn bang_bang_curvature_margins() {
        let sys = scalar_system(0.9, 0.1);
        let r: CostFn = Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap());
        let rep = check_m_given_r(&sys, &r, &s(0.7), &GridSpec::default(), Route::Auto).unwrap();
        assert!(rep.feasible);
        // Upper slack ½a²/m − b²·½ is attained on the quadratic branch.
        assert!((rep.margins["curvature_upper"] - (0.5 * 0.81 / 0.7 - 0.005)).abs() < 1e-12);
        // Lower slack is b²·0 − ½(a² − 1)/m on the saturated branch.
        assert!((rep.margins["curvature_lower"] - 0.5 * 0.19 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn unstable_bounded_domain_lacks_hypotheses() {
        let sys = scalar_system(1.5, 0.1);
        let r: CostFn = Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap());
        let res = check_m_given_r(&sys, &r, &s(0.7), &GridSpec::default(), Route::Auto);
        assert!(matches!(res, Err(SynthesisError::InsufficientHypotheses(_))), "{res:?}");
        let res = check_m_given_r(&sys, &r, &s(0.7), &GridSpec::default(), Route::Curvature);
        assert!(matches!(res, Err(SynthesisError::InsufficientHypotheses(_))));
    }

    #[test]
    fn bounds_route_for_quadratic_cost() {
        // r = u², b = 1: r*(ξ) = ξ²/4 so l = u = ¼. Condition: ¼ ≤ a²/(4m) ≤ ¼ + 1/m.
        let sys = scalar_system(2.0, 1.0);
        let r: CostFn = Arc::new(Quadratic::new(s(1.0)).unwrap());
        let grid = GridSpec::default();
        let rep = check_m_given_r(&sys, &r, &s(3.0), &grid, Route::Auto).unwrap();
        assert_eq!(rep.route, Some(Route::QuadraticBounds));
        let (l, u) = rep.quadratic_bounds.unwrap();
        assert!((l - 0.25).abs() < 1e-12 && (u - 0.25).abs() < 1e-12);
        assert!(rep.feasible);
        assert!((rep.margins["bound_upper"] - (1.0 / 3.0 - 0.25)).abs() < 1e-12);
        assert!(!check_m_given_r(&sys, &r, &s(5.0), &grid, Route::Auto).unwrap().feasible);
    }
}
