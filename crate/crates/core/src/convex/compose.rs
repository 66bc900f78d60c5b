//! Combinators: scaling, sums, quadratic shifts, numeric conjugates and
//! tabulated scalar functions.

use std::sync::Arc;

use rayon::prelude::*;

use super::{
    check_dim, ConvexFunction, CostFn, CostSpec, DualFunction, ElasticNet, FunctionKind, Matrix,
    Quadratic, Result, Vector,
};
use crate::linalg;

/// `c·φ` for `c > 0`.
#[derive(Debug, Clone)]
pub struct Scaled {
    c: f64,
    inner: CostFn,
}

impl Scaled {
    pub fn new(c: f64, inner: CostFn) -> Self {
        Self { c, inner }
    }
}

impl ConvexFunction for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kind(&self) -> FunctionKind {
        self.inner.kind()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.c * self.inner.value(x)?)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.inner.gradient(x)? * self.c)
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.inner.hessian(x).map(|h| h * self.c)
    }
    fn nearest_subgradient(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        Ok(self.inner.nearest_subgradient(x, &(target / self.c))? * self.c)
    }
    fn interior_point(&self) -> Vector {
        self.inner.interior_point()
    }
    fn bounded_domain(&self) -> bool {
        self.inner.bounded_domain()
    }
    fn name(&self) -> String {
        format!("{}·{}", self.c, self.inner.name())
    }
}

/// `Σ φᵢ`.
#[derive(Debug, Clone)]
pub struct Sum {
    parts: Vec<CostFn>,
}

impl Sum {
    pub fn new(parts: Vec<CostFn>) -> Self {
        assert!(!parts.is_empty(), "sum of zero functions");
        Self { parts }
    }
}

impl ConvexFunction for Sum {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }
    fn kind(&self) -> FunctionKind {
        self.parts.iter().map(|p| p.kind()).max_by_key(|k| *k as u8).unwrap()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        self.parts.iter().try_fold(0.0, |acc, p| Ok(acc + p.value(x)?))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.parts.iter().try_fold(Vector::zeros(self.dim()), |acc, p| Ok(acc + p.gradient(x)?))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.parts.iter().try_fold(Matrix::zeros(self.dim(), self.dim()), |acc, p| Some(acc + p.hessian(x)?))
    }
    fn nearest_subgradient(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        let grads: Vec<Vector> = self.parts.iter().map(|p| p.gradient(x)).collect::<Result<_>>()?;
        let total: Vector = grads.iter().fold(Vector::zeros(self.dim()), |a, g| a + g);
        let mut out = Vector::zeros(self.dim());
        for (p, g) in self.parts.iter().zip(&grads) {
            let rest = &total - g;
            out += p.nearest_subgradient(x, &(target - rest))?;
        }
        Ok(out)
    }
    fn interior_point(&self) -> Vector {
        self.parts[0].interior_point()
    }
    fn bounded_domain(&self) -> bool {
        self.parts.iter().any(|p| p.bounded_domain())
    }
    fn name(&self) -> String {
        self.parts.iter().map(|p| p.name()).collect::<Vec<_>>().join(" + ")
    }
}

/// `φ(x) + xᵀSx` for symmetric `S`. A negative `S` is allowed as long as the
/// result stays convex, which is how `q = p − xᵀMx` is formed.
#[derive(Debug, Clone)]
pub struct ShiftedByQuadratic {
    base: CostFn,
    shift: Matrix,
}

impl ShiftedByQuadratic {
    pub fn new(base: CostFn, shift: Matrix) -> Self {
        Self { base, shift: linalg::symmetrize(&shift) }
    }
    pub fn base(&self) -> &CostFn {
        &self.base
    }
}

impl ConvexFunction for ShiftedByQuadratic {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn kind(&self) -> FunctionKind {
        self.base.kind()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        let v = self.base.value(x)?;
        if !v.is_finite() {
            return Ok(v);
        }
        Ok(v + x.dot(&(&self.shift * x)))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.base.gradient(x)? + &self.shift * x * 2.0)
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        self.base.hessian(x).map(|h| h + &self.shift * 2.0)
    }
    fn nearest_subgradient(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        let lin = &self.shift * x * 2.0;
        Ok(self.base.nearest_subgradient(x, &(target - &lin))? + lin)
    }
    fn interior_point(&self) -> Vector {
        self.base.interior_point()
    }
    fn bounded_domain(&self) -> bool {
        self.base.bounded_domain()
    }
    fn name(&self) -> String {
        format!("{} + xᵀSx", self.base.name())
    }
}

/// `φ + xᵀMx`, collapsing to a catalog member when the sum stays in its
/// family (quadratics, and elastic nets shifted by a multiple of `I`).
pub fn add_quadratic(base: &CostFn, m: &Matrix) -> Result<CostFn> {
    check_dim(base.dim(), &Vector::zeros(m.nrows()))?;
    match base.spec() {
        Some(CostSpec::Quadratic { weight }) => {
            let w = linalg::from_rows(&weight).expect("catalog weight is rectangular");
            if let Ok(q) = Quadratic::new(w + m) {
                return Ok(Arc::new(q));
            }
        }
        Some(CostSpec::ElasticNet { eps, l1 }) => {
            let mu = m[(0, 0)];
            let n = m.nrows();
            if (m - Matrix::identity(n, n) * mu).amax() == 0.0 && eps + mu > 0.0 {
                return Ok(Arc::new(ElasticNet::new(l1, eps + mu, n)?));
            }
        }
        _ => {}
    }
    Ok(Arc::new(ShiftedByQuadratic::new(base.clone(), m.clone())))
}

/// `ψ*` computed numerically for a convex `ψ` given only through values and
/// gradients.
#[derive(Debug, Clone)]
pub struct NumericConjugate {
    source: CostFn,
    dual: DualFunction,
}

impl NumericConjugate {
    pub fn new(source: CostFn) -> Self {
        let dual = DualFunction::numeric(source.clone());
        Self { source, dual }
    }
}

impl ConvexFunction for NumericConjugate {
    fn dim(&self) -> usize {
        self.source.dim()
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::NumericBiconjugate
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        match self.dual.value(x) {
            Err(super::ConvexError::UnboundedDual { .. }) => Ok(f64::INFINITY),
            other => other,
        }
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        match self.dual.gradient(x) {
            Err(super::ConvexError::OutOfRange { .. }) => Err(super::ConvexError::Domain {
                function: self.name(),
                point: x.iter().copied().collect(),
            }),
            other => other,
        }
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let u = self.dual.gradient(x).ok()?;
        let h = self.source.hessian(&u)?;
        if linalg::min_eigenvalue(&h) <= 1e-14 * (1.0 + h.amax()) {
            return None;
        }
        h.try_inverse().map(|m| linalg::symmetrize(&m))
    }
    fn conjugate(&self) -> Option<CostFn> {
        Some(self.source.clone())
    }
    fn name(&self) -> String {
        format!("({})*", self.source.name())
    }
}

/// `ξ ↦ −φ*(Lξ) + ¼ξᵀSξ`, the conjugate appearing on one side of the
/// Riccati-like identity once the other side is fixed.
#[derive(Debug, Clone)]
pub struct RiccatiDual {
    inner: DualFunction,
    map: Matrix,
    quarter: Matrix,
}

impl RiccatiDual {
    /// `inner` is `φ*`, `map` is `L`, `quad` is `S` (the ¼ is applied here).
    pub fn new(inner: DualFunction, map: Matrix, quad: Matrix) -> Self {
        Self { inner, map, quarter: linalg::symmetrize(&quad) * 0.25 }
    }
}

impl ConvexFunction for RiccatiDual {
    fn dim(&self) -> usize {
        self.map.ncols()
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::NumericBiconjugate
    }
    fn value(&self, xi: &Vector) -> Result<f64> {
        check_dim(self.dim(), xi)?;
        let inner = self.inner.value(&(&self.map * xi))?;
        Ok(xi.dot(&(&self.quarter * xi)) - inner)
    }
    fn gradient(&self, xi: &Vector) -> Result<Vector> {
        check_dim(self.dim(), xi)?;
        let g = self.inner.gradient(&(&self.map * xi))?;
        Ok(&self.quarter * xi * 2.0 - self.map.transpose() * g)
    }
    fn hessian(&self, xi: &Vector) -> Option<Matrix> {
        let h = self.inner.hessian(&(&self.map * xi))?;
        Some(linalg::symmetrize(&(&self.quarter * 2.0 - self.map.transpose() * h * &self.map)))
    }
    fn name(&self) -> String {
        "riccati-dual".into()
    }
}

/// Even scalar function stored as a cubic Hermite table on `[0, x_max]`,
/// evaluated exactly by its source beyond the table.
#[derive(Debug, Clone)]
pub struct Tabulated {
    source: CostFn,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Tabulated {
    pub fn new(source: CostFn, x_max: f64, nodes: usize) -> Result<Self> {
        if source.dim() != 1 || nodes < 2 || x_max <= 0.0 {
            return Err(super::ConvexError::Parameter("tabulation needs a scalar source, two nodes and x_max > 0".into()));
        }
        let step = x_max / (nodes - 1) as f64;
        let table: Vec<(f64, f64)> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 * step;
                Ok((source.value_at(x)?, source.gradient_at(x)?))
            })
            .collect::<Result<_>>()?;
        let (values, slopes) = table.into_iter().unzip();
        Ok(Self { source, step, values, slopes })
    }

    pub fn x_max(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn locate(&self, ax: f64) -> Option<(usize, f64)> {
        if ax >= self.x_max() {
            return None;
        }
        let i = ((ax / self.step) as usize).min(self.values.len() - 2);
        Some((i, (ax - i as f64 * self.step) / self.step))
    }
}

impl ConvexFunction for Tabulated {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::NumericBiconjugate
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(1, x)?;
        let ax = x[0].abs();
        let Some((i, t)) = self.locate(ax) else { return self.source.value(x) };
        let h = self.step;
        let (y0, y1, m0, m1) = (self.values[i], self.values[i + 1], self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(1, x)?;
        let ax = x[0].abs();
        let Some((i, t)) = self.locate(ax) else { return self.source.gradient(x) };
        let h = self.step;
        let (y0, y1, m0, m1) = (self.values[i], self.values[i + 1], self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let d = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1) / h;
        Ok(linalg::scalar(if x[0] < 0.0 { -d } else { d }))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let ax = x[0].abs();
        let Some((i, t)) = self.locate(ax) else { return self.source.hessian(x) };
        let h = self.step;
        let (y0, y1, m0, m1) = (self.values[i], self.values[i + 1], self.slopes[i] * h, self.slopes[i + 1] * h);
        let d2 = ((12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * m0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * m1) / (h * h);
        Some(Matrix::from_element(1, 1, d2))
    }
    fn name(&self) -> String {
        format!("table({})", self.source.name())
    }
}
