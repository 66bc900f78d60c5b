//! Fenchel conjugates and gradient inversion.

use super::{scalar, ConvexError, ConvexFunction, CostFn, FunctionKind, Matrix, Result, Vector};
use crate::linalg;

/// Settings for the n-dimensional conjugation solver.
#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    /// Stationarity residual `‖ξ − ∇φ(x)‖ ≤ tol·(1 + ‖ξ‖)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self { tol: crate::tolerances::TOL_DUAL, max_iter: 500 }
    }
}

/// The Fenchel conjugate `φ*` of a convex function together with the dual
/// gradient `∇φ* = (∇φ)⁻¹`.
///
/// When the primal advertises a closed-form conjugate it is used; otherwise
/// values come from numeric maximization of `ξᵀx − φ(x)`.
#[derive(Debug, Clone)]
pub struct DualFunction {
    primal: CostFn,
    closed: Option<CostFn>,
    options: DualOptions,
}

impl DualFunction {
    pub fn new(primal: CostFn) -> Self {
        let closed = primal.conjugate();
        Self { primal, closed, options: DualOptions::default() }
    }

    /// Always conjugate numerically, ignoring any closed form.
    pub fn numeric(primal: CostFn) -> Self {
        Self { primal, closed: None, options: DualOptions::default() }
    }

    pub fn with_options(mut self, options: DualOptions) -> Self {
        self.options = options;
        self
    }

    pub fn primal(&self) -> &CostFn {
        &self.primal
    }

    pub fn dim(&self) -> usize {
        self.primal.dim()
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    pub fn kind(&self) -> FunctionKind {
        match &self.closed {
            Some(c) => c.kind(),
            None => FunctionKind::NumericBiconjugate,
        }
    }

    /// `φ*(ξ) = sup_x ξᵀx − φ(x)`.
    pub fn value(&self, xi: &Vector) -> Result<f64> {
        super::check_dim(self.dim(), xi)?;
        if let Some(c) = &self.closed {
            return c.value(xi);
        }
        if self.dim() == 1 {
            let start = self.primal.interior_point()[0];
            return scalar::conjugate(self.primal.as_ref(), xi[0], start).map(|(v, _)| v);
        }
        self.maximize(xi).map(|(_, v)| v)
    }

    /// `∇φ*(ξ)`: the point `u` with `∇φ(u) = ξ`, or the boundary point of
    /// the effective domain when `ξ` lies beyond the gradient range.
    pub fn gradient(&self, xi: &Vector) -> Result<Vector> {
        super::check_dim(self.dim(), xi)?;
        if let Some(c) = &self.closed {
            return c.gradient(xi);
        }
        if self.dim() == 1 {
            let start = self.primal.interior_point()[0];
            return scalar::invert_gradient(self.primal.as_ref(), xi[0], start).map(linalg::scalar);
        }
        self.maximize(xi).map(|(x, _)| x)
    }

    /// `∇²φ*(ξ)`. Closed forms use their own Hessian; the numeric route
    /// differentiates the dual gradient by central differences.
    pub fn hessian(&self, xi: &Vector) -> Option<Matrix> {
        if let Some(c) = &self.closed {
            return c.hessian(xi);
        }
        let n = self.dim();
        let mut h = Matrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-5 * (1.0 + xi[j].abs());
            let mut plus = xi.clone();
            plus[j] += step;
            let mut minus = xi.clone();
            minus[j] -= step;
            let gp = self.gradient(&plus).ok()?;
            let gm = self.gradient(&minus).ok()?;
            h.set_column(j, &((gp - gm) / (2.0 * step)));
        }
        Some(linalg::symmetrize(&h))
    }

    /// Damped Newton ascent on `ξᵀx − φ(x)`, falling back to gradient
    /// ascent where the Hessian is unavailable.
    fn maximize(&self, xi: &Vector) -> Result<(Vector, f64)> {
        let f = self.primal.as_ref();
        let objective = |x: &Vector| -> Result<f64> {
            let v = f.value(x)?;
            Ok(if v.is_finite() { xi.dot(x) - v } else { f64::NEG_INFINITY })
        };
        let scale = 1.0 + xi.norm();
        let mut x = f.interior_point();
        let mut gx = objective(&x)?;
        let mut residual = f64::INFINITY;
        let mut ascent_step = 1.0;
        for _ in 0..self.options.max_iter {
            let sub = f.nearest_subgradient(&x, xi)?;
            let res = xi - sub;
            residual = res.norm();
            if residual <= self.options.tol * scale {
                return Ok((x, gx));
            }
            let newton = f
                .hessian(&x)
                .and_then(|h| h.cholesky())
                .map(|chol| chol.solve(&res));
            let is_newton = newton.is_some();
            let (dir, mut t) = match newton {
                Some(d) => (d, 1.0),
                None => (res.clone(), ascent_step),
            };
            let slope = res.dot(&dir);
            let mut accepted = false;
            for _ in 0..80 {
                let cand = &x + &dir * t;
                let gc = objective(&cand)?;
                if gc.is_finite() && gc >= gx + 1e-4 * t * slope - 1e-14 * (1.0 + gx.abs()) {
                    x = cand;
                    gx = gc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            if !is_newton {
                ascent_step = (t * 2.0).min(1e6);
            }
            if x.norm() > 1e12 {
                return Err(ConvexError::UnboundedDual { direction: xi.iter().copied().collect() });
            }
        }
        Err(ConvexError::Convergence { iterations: self.options.max_iter, residual })
    }
}

/// `φ*(ξ)`.
pub fn dual_value(phi: &CostFn, xi: &Vector) -> Result<f64> {
    DualFunction::new(phi.clone()).value(xi)
}

/// `∇φ*(ξ)`.
pub fn dual_gradient(phi: &CostFn, xi: &Vector) -> Result<Vector> {
    DualFunction::new(phi.clone()).gradient(xi)
}

/// The conjugate is itself a convex function; this lets it be conjugated
/// again or used wherever a cost is expected.
impl ConvexFunction for DualFunction {
    fn dim(&self) -> usize {
        DualFunction::dim(self)
    }
    fn kind(&self) -> FunctionKind {
        DualFunction::kind(self)
    }
    fn value(&self, xi: &Vector) -> Result<f64> {
        DualFunction::value(self, xi)
    }
    fn gradient(&self, xi: &Vector) -> Result<Vector> {
        DualFunction::gradient(self, xi)
    }
    fn hessian(&self, xi: &Vector) -> Option<Matrix> {
        DualFunction::hessian(self, xi)
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(self.primal.clone())
    }
    fn name(&self) -> String {
        format!("conjugate of {}", self.primal.name())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::convex::{BoxedQuadratic, ConvexFunction, ElasticNet, ExpCost, NegativeEntropy, Quadratic};
    use crate::linalg::scalar;

    #[test]
    fn self_dual_half_norm() {
        let phi: CostFn = Arc::new(Quadratic::half_squared_norm(2));
        let xi = Vector::from_vec(vec![3.0, 4.0]);
        assert!((dual_value(&phi, &xi).unwrap() - 12.5).abs() < 1e-12);
        let numeric = DualFunction::numeric(phi.clone());
        assert!((numeric.value(&xi).unwrap() - 12.5).abs() < 1e-9);
        assert!((numeric.gradient(&xi).unwrap() - &xi).norm() < 1e-9);
        assert_eq!(dual_gradient(&phi, &xi).unwrap(), xi);
    }

    #[test]
    fn zero_maps_to_zero() {
        let fns: Vec<CostFn> = vec![
            Arc::new(Quadratic::half_squared_norm(1)),
            Arc::new(ExpCost),
            Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap()),
            Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap()),
        ];
        for f in fns {
            let d = DualFunction::numeric(f.clone());
            assert!(d.value(&scalar(0.0)).unwrap().abs() < 1e-15, "{}", f.name());
            assert!(d.gradient(&scalar(0.0)).unwrap()[0].abs() < 1e-15, "{}", f.name());
        }
    }

    #[test]
    fn exponential_cost_dual_by_bisection() {
        // Analytic check: (1 + |ξ|) ln(1 + |ξ|) − |ξ| at ξ = 1 is 2 ln 2 − 1.
        let expected = 0.386_294_361_119_890_6;
        let d = DualFunction::numeric(Arc::new(ExpCost));
        assert!((d.value(&scalar(1.0)).unwrap() - expected).abs() < 1e-12);
        // ∇φ(1) = e − 1
        let u = d.gradient(&scalar(std::f64::consts::E - 1.0)).unwrap()[0];
        assert!((u - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boxed_quadratic_inverts_to_boundary() {
        let d = DualFunction::numeric(Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap()));
        assert!((d.gradient(&scalar(3.0)).unwrap()[0] - 1.5).abs() < 1e-14);
        assert_eq!(d.gradient(&scalar(20.0)).unwrap()[0], 4.0);
        assert_eq!(d.gradient(&scalar(-20.0)).unwrap()[0], -4.0);
        // t|η| − t² beyond the knee
        assert!((d.value(&scalar(20.0)).unwrap() - (80.0 - 16.0)).abs() < 1e-9);
    }

    #[test]
    fn kink_inversion_selects_minimum_norm() {
        let d = DualFunction::numeric(Arc::new(ElasticNet::new(1.0, 0.5, 1).unwrap()));
        assert!(d.gradient(&scalar(0.4)).unwrap()[0].abs() < 1e-50);
        assert!((d.gradient(&scalar(3.0)).unwrap()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sublinear_growth_is_unbounded() {
        let r = DualFunction::numeric(Arc::new(AbsOnly)).value(&scalar(2.0));
        assert!(matches!(r, Err(ConvexError::UnboundedDual { .. })), "{r:?}");
        let r = DualFunction::numeric(Arc::new(AbsOnly)).gradient(&scalar(2.0));
        assert!(matches!(r, Err(ConvexError::OutOfRange { .. })), "{r:?}");
        // Inside the gradient range the conjugate is 0.
        assert_eq!(DualFunction::numeric(Arc::new(AbsOnly)).value(&scalar(0.5)).unwrap(), 0.0);
    }

    #[derive(Debug)]
    struct AbsOnly;
    impl ConvexFunction for AbsOnly {
        fn dim(&self) -> usize {
            1
        }
        fn kind(&self) -> FunctionKind {
            FunctionKind::PiecewiseClosedForm
        }
        fn value(&self, x: &Vector) -> Result<f64> {
            Ok(x[0].abs())
        }
        fn gradient(&self, x: &Vector) -> Result<Vector> {
            Ok(scalar(if x[0] > 0.0 { 1.0 } else if x[0] < 0.0 { -1.0 } else { 0.0 }))
        }
        fn hessian(&self, _x: &Vector) -> Option<Matrix> {
            None
        }
        fn name(&self) -> String {
            "abs".into()
        }
    }

    #[test]
    fn newton_route_matches_closed_form_in_two_dimensions() {
        let w = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let phi: CostFn = Arc::new(Quadratic::new(w).unwrap());
        let closed = DualFunction::new(phi.clone());
        let numeric = DualFunction::numeric(phi);
        let xi = Vector::from_vec(vec![0.7, -1.9]);
        assert!((closed.value(&xi).unwrap() - numeric.value(&xi).unwrap()).abs() < 1e-12);
        assert!((closed.gradient(&xi).unwrap() - numeric.gradient(&xi).unwrap()).norm() < 1e-10);
        let hc = closed.hessian(&xi).unwrap();
        let hn = numeric.hessian(&xi).unwrap();
        assert!((hc - hn).amax() < 1e-7);
    }

    #[test]
    fn negative_entropy_conjugate_is_exp_sum() {
        let phi: CostFn = Arc::new(NegativeEntropy { dim: 2 });
        let xi = Vector::from_vec(vec![0.5, -1.0]);
        let numeric = DualFunction::numeric(phi.clone()).value(&xi).unwrap();
        let closed = dual_value(&phi, &xi).unwrap();
        assert!((numeric - closed).abs() < 1e-10, "{numeric} vs {closed}");
    }
}
