//! Closed-form convex functions and their conjugate pairs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_dim, ConvexError, ConvexFunction, CostFn, FunctionKind, Matrix, Result, Vector};
use crate::linalg;

/// Serializable description of a registered cost family.
///
/// Scalar families (`bangbang`, `exponential`) are one-dimensional; the
/// quadratic and elastic-net families take their dimension from the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    /// `xᵀWx`.
    Quadratic { weight: Vec<Vec<f64>> },
    /// `Σ l1·|xᵢ| + eps·xᵢ²`.
    #[serde(rename = "elasticnet")]
    ElasticNet {
        eps: f64,
        #[serde(default = "one")]
        l1: f64,
    },
    /// `u²` on `|u| ≤ t`, `+∞` beyond.
    #[serde(rename = "bangbang")]
    BangBang { t: f64 },
    /// `e^{|u|} − |u| − 1`.
    Exponential {},
}

fn one() -> f64 {
    1.0
}

impl CostSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            CostSpec::Quadratic { .. } => "quadratic",
            CostSpec::ElasticNet { .. } => "elasticnet",
            CostSpec::BangBang { .. } => "bangbang",
            CostSpec::Exponential {} => "exponential",
        }
    }

    pub fn build(&self, dim: usize) -> Result<CostFn> {
        match self {
            CostSpec::Quadratic { weight } => {
                let w = linalg::from_rows(weight)
                    .ok_or_else(|| ConvexError::Parameter("ragged quadratic weight".into()))?;
                if w.nrows() != dim || w.ncols() != dim {
                    return Err(ConvexError::Dimension { expected: dim, got: w.nrows() });
                }
                Ok(Arc::new(Quadratic::new(w)?))
            }
            CostSpec::ElasticNet { eps, l1 } => Ok(Arc::new(ElasticNet::new(*l1, *eps, dim)?)),
            CostSpec::BangBang { t } => {
                scalar_only(dim, "bangbang")?;
                Ok(Arc::new(BoxedQuadratic::new(1.0, *t)?))
            }
            CostSpec::Exponential {} => {
                scalar_only(dim, "exponential")?;
                Ok(Arc::new(ExpCost))
            }
        }
    }
}

fn scalar_only(dim: usize, family: &str) -> Result<()> {
    if dim == 1 {
        Ok(())
    } else {
        Err(ConvexError::Parameter(format!("{family} is a scalar family, got dimension {dim}")))
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `φ(x) = xᵀWx` with `W` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    weight: Matrix,
}

impl Quadratic {
    pub fn new(weight: Matrix) -> Result<Self> {
        if !linalg::is_symmetric(&weight, 1e-12) {
            return Err(ConvexError::Parameter("quadratic weight must be symmetric".into()));
        }
        if linalg::min_eigenvalue(&weight) < -1e-12 {
            return Err(ConvexError::Parameter("quadratic weight must be PSD".into()));
        }
        Ok(Self { weight: linalg::symmetrize(&weight) })
    }

    /// `½‖x‖²`.
    pub fn half_squared_norm(dim: usize) -> Self {
        Self { weight: Matrix::identity(dim, dim) * 0.5 }
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }
}

impl ConvexFunction for Quadratic {
    fn dim(&self) -> usize {
        self.weight.nrows()
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(x.dot(&(&self.weight * x)))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        Ok(&self.weight * x * 2.0)
    }
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        Some(&self.weight * 2.0)
    }
    fn conjugate(&self) -> Option<CostFn> {
        if !linalg::is_positive_definite(&self.weight) {
            return None;
        }
        let inv = self.weight.clone().try_inverse()?;
        Some(Arc::new(Quadratic { weight: linalg::symmetrize(&(inv * 0.25)) }))
    }
    fn spec(&self) -> Option<CostSpec> {
        Some(CostSpec::Quadratic { weight: linalg::to_rows(&self.weight) })
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// Negative entropy `Σ xᵢ ln xᵢ − xᵢ` on the open positive orthant.
#[derive(Debug, Clone, Copy)]
pub struct NegativeEntropy {
    pub dim: usize,
}

impl ConvexFunction for NegativeEntropy {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x)?;
        if x.iter().any(|&v| !(v > 0.0)) {
            return Ok(f64::INFINITY);
        }
        Ok(x.iter().map(|&v| v * v.ln() - v).sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(ConvexError::Domain { function: self.name(), point: x.iter().copied().collect() });
        }
        Ok(x.map(f64::ln))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        if x.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        Some(Matrix::from_diagonal(&x.map(|v| 1.0 / v)))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(ExpSum { dim: self.dim }))
    }
    fn interior_point(&self) -> Vector {
        Vector::from_element(self.dim, 1.0)
    }
    fn name(&self) -> String {
        "negative-entropy".into()
    }
}

/// `Σ e^{xᵢ}`, the conjugate of the negative entropy.
#[derive(Debug, Clone, Copy)]
pub struct ExpSum {
    pub dim: usize,
}

impl ConvexFunction for ExpSum {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(x.iter().map(|v| v.exp()).sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        Ok(x.map(f64::exp))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_diagonal(&x.map(f64::exp)))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(NegativeEntropy { dim: self.dim }))
    }
    fn name(&self) -> String {
        "exp-sum".into()
    }
}

/// Separable elastic net `Σ l1·|xᵢ| + quad·xᵢ²`.
#[derive(Debug, Clone, Copy)]
pub struct ElasticNet {
    l1: f64,
    quad: f64,
    dim: usize,
}

impl ElasticNet {
    pub fn new(l1: f64, quad: f64, dim: usize) -> Result<Self> {
        if !(l1 >= 0.0) || !(quad > 0.0) || dim == 0 {
            return Err(ConvexError::Parameter(format!(
                "elastic net needs l1 ≥ 0, eps > 0 (got l1={l1}, eps={quad})"
            )));
        }
        Ok(Self { l1, quad, dim })
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn quad(&self) -> f64 {
        self.quad
    }
}

impl ConvexFunction for ElasticNet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(x.iter().map(|v| self.l1 * v.abs() + self.quad * v * v).sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        Ok(x.map(|v| self.l1 * sign(v) + 2.0 * self.quad * v))
    }
    fn nearest_subgradient(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        Ok(Vector::from_fn(self.dim, |i, _| {
            if x[i] == 0.0 {
                target[i].clamp(-self.l1, self.l1)
            } else {
                self.l1 * sign(x[i]) + 2.0 * self.quad * x[i]
            }
        }))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        if self.l1 > 0.0 && x.iter().any(|&v| v == 0.0) {
            return None;
        }
        Some(Matrix::identity(self.dim, self.dim) * (2.0 * self.quad))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(ElasticNetDual { l1: self.l1, quad: self.quad, dim: self.dim }))
    }
    fn spec(&self) -> Option<CostSpec> {
        Some(CostSpec::ElasticNet { eps: self.quad, l1: self.l1 })
    }
    fn name(&self) -> String {
        format!("elastic-net(l1={}, eps={})", self.l1, self.quad)
    }
}

/// `Σ (|ξᵢ| − l1)₊² / (4·quad)`, the conjugate of [`ElasticNet`].
#[derive(Debug, Clone, Copy)]
pub struct ElasticNetDual {
    l1: f64,
    quad: f64,
    dim: usize,
}

impl ConvexFunction for ElasticNetDual {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(x.iter()
            .map(|v| {
                let s = (v.abs() - self.l1).max(0.0);
                s * s / (4.0 * self.quad)
            })
            .sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        Ok(x.map(|v| sign(v) * (v.abs() - self.l1).max(0.0) / (2.0 * self.quad)))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        if self.l1 > 0.0 && x.iter().any(|v| v.abs() == self.l1) {
            return None;
        }
        let d = x.map(|v| if v.abs() > self.l1 { 1.0 / (2.0 * self.quad) } else { 0.0 });
        Some(Matrix::from_diagonal(&d))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(ElasticNet { l1: self.l1, quad: self.quad, dim: self.dim }))
    }
    fn name(&self) -> String {
        format!("elastic-net-dual(l1={}, eps={})", self.l1, self.quad)
    }
}

/// Scalar `coef·u²` restricted to `|u| ≤ bound` (the bang-bang input cost).
#[derive(Debug, Clone, Copy)]
pub struct BoxedQuadratic {
    coef: f64,
    bound: f64,
}

impl BoxedQuadratic {
    pub fn new(coef: f64, bound: f64) -> Result<Self> {
        if !(coef > 0.0) || !(bound > 0.0) {
            return Err(ConvexError::Parameter(format!(
                "boxed quadratic needs coef > 0 and bound t > 0 (got {coef}, {bound})"
            )));
        }
        Ok(Self { coef, bound })
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

impl ConvexFunction for BoxedQuadratic {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(1, x)?;
        let u = x[0];
        Ok(if u.abs() <= self.bound { self.coef * u * u } else { f64::INFINITY })
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(1, x)?;
        let u = x[0];
        if u.abs() > self.bound {
            return Err(ConvexError::Domain { function: self.name(), point: vec![u] });
        }
        Ok(linalg::scalar(2.0 * self.coef * u))
    }
    fn nearest_subgradient(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        let g = self.gradient(x)?;
        let u = x[0];
        // On the boundary the normal cone adds every outward multiple.
        if u.abs() == self.bound && target[0] * sign(u) > g[0] * sign(u) {
            return Ok(target.clone());
        }
        Ok(g)
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        (x[0].abs() < self.bound).then(|| Matrix::from_element(1, 1, 2.0 * self.coef))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(BoxedQuadraticDual { coef: self.coef, bound: self.bound }))
    }
    fn bounded_domain(&self) -> bool {
        true
    }
    fn spec(&self) -> Option<CostSpec> {
        (self.coef == 1.0).then_some(CostSpec::BangBang { t: self.bound })
    }
    fn name(&self) -> String {
        format!("boxed-quadratic(coef={}, t={})", self.coef, self.bound)
    }
}

/// Conjugate of [`BoxedQuadratic`]: `η²/(4c)` for `|η| ≤ 2ct`, `t|η| − ct²` beyond.
#[derive(Debug, Clone, Copy)]
pub struct BoxedQuadraticDual {
    coef: f64,
    bound: f64,
}

impl BoxedQuadraticDual {
    fn knee(&self) -> f64 {
        2.0 * self.coef * self.bound
    }
}

impl ConvexFunction for BoxedQuadraticDual {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(1, x)?;
        let s = x[0].abs();
        Ok(if s <= self.knee() {
            s * s / (4.0 * self.coef)
        } else {
            self.bound * s - self.coef * self.bound * self.bound
        })
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(1, x)?;
        Ok(linalg::scalar((x[0] / (2.0 * self.coef)).clamp(-self.bound, self.bound)))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let s = x[0].abs();
        if s == self.knee() {
            return None;
        }
        let h = if s < self.knee() { 1.0 / (2.0 * self.coef) } else { 0.0 };
        Some(Matrix::from_element(1, 1, h))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(BoxedQuadratic { coef: self.coef, bound: self.bound }))
    }
    fn name(&self) -> String {
        format!("boxed-quadratic-dual(coef={}, t={})", self.coef, self.bound)
    }
}

/// Scalar `e^{|u|} − |u| − 1`.
#[derive(Debug, Clone, Copy)]
pub struct ExpCost;

impl ConvexFunction for ExpCost {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(1, x)?;
        let s = x[0].abs();
        Ok(s.exp_m1() - s)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(1, x)?;
        Ok(linalg::scalar(sign(x[0]) * x[0].abs().exp_m1()))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_element(1, 1, x[0].abs().exp()))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(ExpCostDual))
    }
    fn spec(&self) -> Option<CostSpec> {
        Some(CostSpec::Exponential {})
    }
    fn name(&self) -> String {
        "exponential".into()
    }
}

/// `(1+|η|)·ln(1+|η|) − |η|`, the conjugate of [`ExpCost`].
#[derive(Debug, Clone, Copy)]
pub struct ExpCostDual;

impl ConvexFunction for ExpCostDual {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(1, x)?;
        let s = x[0].abs();
        Ok((1.0 + s) * s.ln_1p() - s)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(1, x)?;
        Ok(linalg::scalar(sign(x[0]) * x[0].abs().ln_1p()))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_element(1, 1, 1.0 / (1.0 + x[0].abs())))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(Arc::new(ExpCost))
    }
    fn name(&self) -> String {
        "exponential-dual".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar;

    #[test]
    fn assumption_one_holds_for_even_catalog_members() {
        let fns: Vec<CostFn> = vec![
            Arc::new(Quadratic::half_squared_norm(1)),
            Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap()),
            Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap()),
            Arc::new(ExpCost),
            Arc::new(ExpCostDual),
            Arc::new(BoxedQuadraticDual { coef: 1.0, bound: 4.0 }),
        ];
        for f in fns {
            assert_eq!(f.value_at(0.0).unwrap(), 0.0, "{}", f.name());
            assert_eq!(f.gradient_at(0.0).unwrap(), 0.0, "{}", f.name());
            for x in [0.3, 1.7, 3.9] {
                assert_eq!(f.value_at(x).unwrap(), f.value_at(-x).unwrap(), "{}", f.name());
            }
        }
    }

    #[test]
    fn boxed_quadratic_is_infinite_outside_budget() {
        let r = BoxedQuadratic::new(1.0, 4.0).unwrap();
        assert_eq!(r.value(&scalar(4.0)).unwrap(), 16.0);
        assert!(r.value(&scalar(4.0001)).unwrap().is_infinite());
        assert!(r.gradient(&scalar(5.0)).is_err());
        // normal cone at the boundary
        let g = r.nearest_subgradient(&scalar(4.0), &scalar(20.0)).unwrap();
        assert_eq!(g[0], 20.0);
        let g = r.nearest_subgradient(&scalar(4.0), &scalar(3.0)).unwrap();
        assert_eq!(g[0], 8.0);
    }

    #[test]
    fn elastic_net_subgradient_at_kink_is_clamped() {
        let q = ElasticNet::new(1.0, 0.01, 1).unwrap();
        let g = q.nearest_subgradient(&scalar(0.0), &scalar(0.3)).unwrap();
        assert_eq!(g[0], 0.3);
        let g = q.nearest_subgradient(&scalar(0.0), &scalar(-7.0)).unwrap();
        assert_eq!(g[0], -1.0);
        assert!(q.hessian(&scalar(0.0)).is_none());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let specs = vec![
            CostSpec::Quadratic { weight: vec![vec![1.0, 0.5], vec![0.5, 2.0]] },
            CostSpec::ElasticNet { eps: 0.01, l1: 1.0 },
            CostSpec::BangBang { t: 4.0 },
            CostSpec::Exponential {},
        ];
        for s in specs {
            let text = serde_json::to_string(&s).unwrap();
            let back: CostSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(s, back);
        }
        let parsed: CostSpec = serde_json::from_str(r#"{"name":"elasticnet","eps":0.01}"#).unwrap();
        assert_eq!(parsed, CostSpec::ElasticNet { eps: 0.01, l1: 1.0 });
    }
}
