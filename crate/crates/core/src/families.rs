//! Closed-form scalar controller families: bang-bang, exponential and
//! elastic-net. Each family bundles its `(q, r, p)` triple, the printed
//! feedback law and the parameter inequalities under which it is valid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{
    self, add_quadratic, check_dim, ConvexFunction, CostFn, CostSpec, DualFunction, ElasticNet, ExpCost,
    FunctionKind, Matrix, NumericConjugate, RiccatiDual, ShiftedByQuadratic, Tabulated, Vector,
};
use crate::linalg::scalar;
use crate::synthesis::{self, CertificateParams, Controller, CostTriple, GridSpec, Mode, SynthesisCertificate};
use crate::system::LinearSystem;
use crate::tolerances::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("{family} parameters are infeasible: {inequality} is violated")]
    Infeasible { family: &'static str, inequality: &'static str },
    #[error("{family} needs parameter {name}")]
    Missing { family: &'static str, name: &'static str },
    #[error("{0}")]
    Synthesis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    BangBang,
    Exponential,
    ElasticNet,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BangBang => "bangbang",
            Self::Exponential => "exponential",
            Self::ElasticNet => "elasticnet",
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Self::ElasticNet => Mode::StateCostFirst,
            _ => Mode::ControlCostFirst,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bangbang" => Ok(Self::BangBang),
            "exponential" => Ok(Self::Exponential),
            "elasticnet" => Ok(Self::ElasticNet),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

/// Scalar system `x⁺ = ax + bu + w` with value-function weight `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarFamilyParams {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    /// Bang-bang input budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Elastic-net curvature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl ScalarFamilyParams {
    fn base_checks(&self, family: &'static str) -> Result<(), FamilyError> {
        if !(self.b != 0.0 && self.b.is_finite()) {
            return Err(FamilyError::Infeasible { family, inequality: "b ≠ 0" });
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(FamilyError::Infeasible { family, inequality: "m > 0" });
        }
        if !(self.a != 0.0 && self.a.is_finite()) {
            return Err(FamilyError::Infeasible { family, inequality: "a ≠ 0" });
        }
        Ok(())
    }

    fn system(&self) -> LinearSystem {
        LinearSystem::deterministic(Matrix::from_element(1, 1, self.a), Matrix::from_element(1, 1, self.b))
            .expect("scalar system is well formed")
    }
}

/// A closed-form family instance.
#[derive(Debug, Clone)]
pub struct Family {
    pub kind: FamilyKind,
    pub params: ScalarFamilyParams,
    pub system: LinearSystem,
    pub q: CostFn,
    pub r: CostFn,
    pub p: CostFn,
    /// The printed feedback law.
    pub controller: Controller,
}

impl Family {
    pub fn costs(&self) -> CostTriple {
        CostTriple { q: self.q.clone(), r: self.r.clone(), p: self.p.clone() }
    }

    pub fn m(&self) -> Matrix {
        Matrix::from_element(1, 1, self.params.m)
    }

    /// The cost the designer fixes in this family.
    pub fn fixed_cost(&self) -> CostSpec {
        match self.kind {
            FamilyKind::BangBang => CostSpec::BangBang { t: self.params.t.unwrap_or_default() },
            FamilyKind::Exponential => CostSpec::Exponential {},
            FamilyKind::ElasticNet => CostSpec::ElasticNet { eps: self.params.eps.unwrap_or_default(), l1: 1.0 },
        }
    }

    /// The `∇r*(−2ba⁻¹mx)` controller (as opposed to the printed law).
    pub fn dual_controller(&self) -> Controller {
        synthesis::build_controller(&self.system, &self.r, &self.m()).expect("validated family")
    }

    /// A certificate for this family, with margins from the feasibility
    /// check of its design mode.
    pub fn certificate(&self, grid: GridSpec, tolerances: Tolerances) -> Result<SynthesisCertificate, FamilyError> {
        let m = self.m();
        let syn = |e: synthesis::SynthesisError| FamilyError::Synthesis(e.to_string());
        let (margins, route) = match self.kind.mode() {
            Mode::StateCostFirst => {
                let rep = synthesis::check_m_given_q(&self.system, &self.q, &m, &grid).map_err(syn)?;
                let mut margins = rep.margins.clone();
                if let Some(v) = rep.numeric_convexity {
                    margins.insert("numeric_convexity".into(), v.worst_curvature);
                }
                (margins, None)
            }
            Mode::ControlCostFirst => {
                let fixed = self.fixed_cost().build(1).map_err(|e| FamilyError::Synthesis(e.to_string()))?;
                let rep = synthesis::check_m_given_r(&self.system, &fixed, &m, &grid, synthesis::Route::Auto)
                    .map_err(syn)?;
                (rep.margins, rep.route)
            }
        };
        let params = CertificateParams { fixed_cost: self.fixed_cost(), family: Some(self.params), objective: None, route };
        Ok(SynthesisCertificate::new(&self.system, &m, self.kind.mode(), self.kind.name().into(), params, margins, grid, tolerances)
            .with_costs(self.costs()))
    }
}

pub fn family(kind: FamilyKind, params: ScalarFamilyParams) -> Result<Family, FamilyError> {
    match kind {
        FamilyKind::BangBang => bangbang_family(params),
        FamilyKind::Exponential => exponential_family(params),
        FamilyKind::ElasticNet => elasticnet_family(params),
    }
}

fn controller(params: &ScalarFamilyParams, name: &'static str, law: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Controller {
    Controller::scalar(&params.system(), &Matrix::from_element(1, 1, params.m), name, law).expect("validated family")
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Input budget `|u| ≤ t` with `r(u) = u²` inside.
pub fn bangbang_family(params: ScalarFamilyParams) -> Result<Family, FamilyError> {
    const NAME: &str = "bangbang";
    params.base_checks(NAME)?;
    let t = params.t.ok_or(FamilyError::Missing { family: NAME, name: "t" })?;
    if !(t > 0.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "t > 0" });
    }
    let ScalarFamilyParams { a, b, m, .. } = params;
    if !(a * a - b * b * m > 0.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "a² − b²m > 0" });
    }
    let r: CostFn = Arc::new(convex::BoxedQuadratic::new(1.0, t).map_err(|e| FamilyError::Synthesis(e.to_string()))?);
    let q: CostFn = Arc::new(BangBangStateCost { a, b, m, t });
    let p = add_quadratic(&q, &Matrix::from_element(1, 1, m)).map_err(|e| FamilyError::Synthesis(e.to_string()))?;
    let threshold = (a * t / (b * m)).abs();
    let law = move |x: f64| if x.abs() <= threshold { -(b * m / a) * x } else { -a * sgn(x) };
    Ok(Family { kind: FamilyKind::BangBang, params, system: params.system(), q, r, p, controller: controller(&params, NAME, law) })
}

/// `r(u) = e^{|u|} − |u| − 1`; `q` has no closed form and is tabulated.
pub fn exponential_family(params: ScalarFamilyParams) -> Result<Family, FamilyError> {
    const NAME: &str = "exponential";
    params.base_checks(NAME)?;
    let ScalarFamilyParams { a, b, m, .. } = params;
    if !(a * a - 2.0 * b * b * m > 0.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "a² − 2b²m > 0" });
    }
    if !(a * a <= 1.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "a² ≤ 1" });
    }
    let r: CostFn = Arc::new(ExpCost);
    let q = exponential_state_cost(a, b, m).map_err(|e| FamilyError::Synthesis(e.to_string()))?;
    let p: CostFn = Arc::new(ShiftedByQuadratic::new(q.clone(), Matrix::from_element(1, 1, m)));
    let k = 2.0 * b * m / a;
    let law = move |x: f64| -sgn(x) * (k * x).abs().ln_1p();
    Ok(Family { kind: FamilyKind::Exponential, params, system: params.system(), q, r, p, controller: controller(&params, NAME, law) })
}

/// Half-width and node count of the exponential state-cost table.
pub const EXP_TABLE_RANGE: f64 = 100.0;
pub const EXP_TABLE_NODES: usize = 10_001;

/// `q(x) = max_ξ [ξx − a²ξ²/(4m) + r*(bξ)] − mx²`, tabulated.
pub fn exponential_state_cost(a: f64, b: f64, m: f64) -> convex::Result<CostFn> {
    let p_dual = RiccatiDual::new(
        DualFunction::new(Arc::new(ExpCost)),
        Matrix::from_element(1, 1, b),
        Matrix::from_element(1, 1, a * a / m),
    );
    let p: CostFn = Arc::new(NumericConjugate::new(Arc::new(p_dual)));
    let q: CostFn = Arc::new(ShiftedByQuadratic::new(p, Matrix::from_element(1, 1, -m)));
    Ok(Arc::new(Tabulated::new(q, EXP_TABLE_RANGE, EXP_TABLE_NODES)?))
}

/// `q(x) = |x| + εx²` with `M = m`.
pub fn elasticnet_family(params: ScalarFamilyParams) -> Result<Family, FamilyError> {
    const NAME: &str = "elasticnet";
    params.base_checks(NAME)?;
    let eps = params.eps.ok_or(FamilyError::Missing { family: NAME, name: "eps" })?;
    if !(eps > 0.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "ε > 0" });
    }
    let ScalarFamilyParams { a, b, m, .. } = params;
    if !(a * a * (eps + m) - m > 0.0) {
        return Err(FamilyError::Infeasible { family: NAME, inequality: "a²(ε+m) − m > 0" });
    }
    let q: CostFn = Arc::new(ElasticNet::new(1.0, eps, 1).map_err(|e| FamilyError::Synthesis(e.to_string()))?);
    let p = add_quadratic(&q, &Matrix::from_element(1, 1, m)).map_err(|e| FamilyError::Synthesis(e.to_string()))?;
    let r: CostFn = Arc::new(ElasticNetControlCost { a, b, m, eps });
    let law = move |x: f64| {
        let s = (2.0 * m * x / a).abs();
        let base = -(a / b) * x;
        if s <= 1.0 {
            base
        } else {
            base + (s - 1.0) * sgn(x) / (2.0 * b * (eps + m))
        }
    };
    Ok(Family { kind: FamilyKind::ElasticNet, params, system: params.system(), q, r, p, controller: controller(&params, NAME, law) })
}

/// Printed bang-bang state cost: quadratic near the origin, quadratic plus
/// linear beyond `|x| = a²t/(mb) − tb`.
#[derive(Debug, Clone, Copy)]
pub struct BangBangStateCost {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub t: f64,
}

impl BangBangStateCost {
    pub fn breakpoint(&self) -> f64 {
        let Self { a, b, m, t } = *self;
        (a * a * t / (m * b) - t * b).abs()
    }

    fn inner_coef(&self) -> f64 {
        let Self { a, b, m, .. } = *self;
        m * (1.0 / (a * a - b * b * m) - 1.0)
    }

    pub fn inner(&self, x: f64) -> f64 {
        self.inner_coef() * x * x
    }

    pub fn outer(&self, x: f64) -> f64 {
        let Self { a, b, m, t } = *self;
        m * (1.0 / (a * a) - 1.0) * x * x + 2.0 * m * b.abs() * t * x.abs() / (a * a) + t * t * (m * b * b / (a * a) - 1.0)
    }
}

impl ConvexFunction for BangBangStateCost {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, x: &Vector) -> convex::Result<f64> {
        check_dim(1, x)?;
        let x = x[0];
        Ok(if x.abs() <= self.breakpoint() { self.inner(x) } else { self.outer(x) })
    }
    fn gradient(&self, x: &Vector) -> convex::Result<Vector> {
        check_dim(1, x)?;
        let x = x[0];
        let Self { a, b, m, t } = *self;
        Ok(scalar(if x.abs() <= self.breakpoint() {
            2.0 * self.inner_coef() * x
        } else {
            2.0 * m * (1.0 / (a * a) - 1.0) * x + 2.0 * m * b.abs() * t * sgn(x) / (a * a)
        }))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let ax = x[0].abs();
        let bp = self.breakpoint();
        if ax == bp {
            return None;
        }
        let Self { a, m, .. } = *self;
        Some(Matrix::from_element(1, 1, if ax < bp { 2.0 * self.inner_coef() } else { 2.0 * m * (1.0 / (a * a) - 1.0) }))
    }
    fn name(&self) -> String {
        "bang-bang state cost".into()
    }
}

/// Printed elastic-net control cost: `mb²u²/a²` for `|u| ≤ a²/(2mb)`,
/// `[mb²(ε+m)u² − bm|u| + a²/4] / (a²(ε+m) − m)` beyond.
#[derive(Debug, Clone, Copy)]
pub struct ElasticNetControlCost {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub eps: f64,
}

impl ElasticNetControlCost {
    pub fn breakpoint(&self) -> f64 {
        (self.a * self.a / (2.0 * self.m * self.b)).abs()
    }

    fn denom(&self) -> f64 {
        self.a * self.a * (self.eps + self.m) - self.m
    }

    pub fn inner(&self, u: f64) -> f64 {
        self.m * self.b * self.b * u * u / (self.a * self.a)
    }

    pub fn outer(&self, u: f64) -> f64 {
        let Self { a, b, m, eps } = *self;
        (m * b * b * (eps + m) * u * u - b.abs() * m * u.abs() + a * a / 4.0) / self.denom()
    }
}

impl ConvexFunction for ElasticNetControlCost {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::PiecewiseClosedForm
    }
    fn value(&self, u: &Vector) -> convex::Result<f64> {
        check_dim(1, u)?;
        let u = u[0];
        Ok(if u.abs() <= self.breakpoint() { self.inner(u) } else { self.outer(u) })
    }
    fn gradient(&self, u: &Vector) -> convex::Result<Vector> {
        check_dim(1, u)?;
        let u = u[0];
        let Self { a, b, m, eps } = *self;
        Ok(scalar(if u.abs() <= self.breakpoint() {
            2.0 * m * b * b * u / (a * a)
        } else {
            (2.0 * m * b * b * (eps + m) * u - b.abs() * m * sgn(u)) / self.denom()
        }))
    }
    fn hessian(&self, u: &Vector) -> Option<Matrix> {
        let au = u[0].abs();
        let bp = self.breakpoint();
        if au == bp {
            return None;
        }
        let Self { a, b, m, eps } = *self;
        Some(Matrix::from_element(
            1,
            1,
            if au < bp { 2.0 * m * b * b / (a * a) } else { 2.0 * m * b * b * (eps + m) / self.denom() },
        ))
    }
    fn name(&self) -> String {
        "elastic-net control cost".into()
    }
}
