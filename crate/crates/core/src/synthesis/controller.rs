//! The optimal feedback `u = ∇r*(−2BᵀA⁻ᵀMx)`.

use std::fmt;
use std::sync::Arc;

use super::{validate_m, Result, SynthesisError};
use crate::convex::{CostFn, CostSpec, DualFunction};
use crate::linalg::{self, Matrix, Vector};
use crate::system::LinearSystem;

/// How the input is computed from `η = −2BᵀA⁻ᵀMx`, or directly from `x`.
#[derive(Clone)]
pub enum FeedbackLaw {
    /// `u = Gx`.
    Linear(Matrix),
    /// `u = ∇r*(η)`.
    DualGradient(DualFunction),
    /// A scalar closed-form law `u = f(x)`.
    Scalar { name: &'static str, law: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear(g) => f.debug_tuple("Linear").field(g).finish(),
            Self::DualGradient(d) => f.debug_tuple("DualGradient").field(&d.primal().name()).finish(),
            Self::Scalar { name, .. } => f.debug_tuple("Scalar").field(name).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    a: Matrix,
    b: Matrix,
    m: Matrix,
    /// `−2BᵀA⁻ᵀM`.
    dual_map: Matrix,
    law: FeedbackLaw,
}

impl Controller {
    fn dual_map(system: &LinearSystem, m: &Matrix) -> Result<Matrix> {
        let a_inv = system.a_inverse().ok_or(SynthesisError::SingularA)?;
        Ok(system.b.transpose() * a_inv.transpose() * m * -2.0)
    }

    /// Wraps a scalar closed-form law for a scalar system.
    pub fn scalar(
        system: &LinearSystem,
        m: &Matrix,
        name: &'static str,
        law: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if system.state_dim() != 1 || system.input_dim() != 1 {
            return Err(SynthesisError::Dimension("scalar laws need a scalar system".into()));
        }
        Ok(Self {
            a: system.a.clone(),
            b: system.b.clone(),
            m: m.clone(),
            dual_map: Self::dual_map(system, m)?,
            law: FeedbackLaw::Scalar { name, law: Arc::new(law) },
        })
    }

    /// Static linear feedback `u = −Fx`, e.g. an LQR baseline. No value
    /// matrix is attached.
    pub fn linear(system: &LinearSystem, gain: Matrix) -> Result<Self> {
        let (n, m) = (system.state_dim(), system.input_dim());
        if gain.nrows() != m || gain.ncols() != n {
            return Err(SynthesisError::Dimension(format!("gain is {}×{}, expected {m}×{n}", gain.nrows(), gain.ncols())));
        }
        Ok(Self {
            a: system.a.clone(),
            b: system.b.clone(),
            m: Matrix::zeros(n, n),
            dual_map: Matrix::zeros(m, n),
            law: FeedbackLaw::Linear(-gain),
        })
    }

    pub fn feedback(&self, x: &Vector) -> Result<Vector> {
        match &self.law {
            FeedbackLaw::Linear(g) => Ok(g * x),
            FeedbackLaw::DualGradient(d) => Ok(d.gradient(&(&self.dual_map * x))?),
            FeedbackLaw::Scalar { law, .. } => Ok(linalg::scalar(law(x[0]))),
        }
    }

    /// `η = −2BᵀA⁻ᵀMx`, the dual argument of the control law.
    pub fn dual_argument(&self, x: &Vector) -> Vector {
        &self.dual_map * x
    }

    pub fn law(&self) -> &FeedbackLaw {
        &self.law
    }

    /// The gain `G` when the law is linear.
    pub fn gain(&self) -> Option<&Matrix> {
        match &self.law {
            FeedbackLaw::Linear(g) => Some(g),
            _ => None,
        }
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }
}

/// `x ↦ ∇r*(−2BᵀA⁻ᵀMx)`. Quadratic `r = uᵀRu` yields the linear gain
/// `−R⁻¹BᵀA⁻ᵀM`.
pub fn build_controller(system: &LinearSystem, r: &CostFn, m: &Matrix) -> Result<Controller> {
    validate_m(m, system.state_dim())?;
    if r.dim() != system.input_dim() {
        return Err(SynthesisError::Dimension(format!("r has dimension {}, B has {} columns", r.dim(), system.input_dim())));
    }
    let dual_map = Controller::dual_map(system, m)?;
    let law = match r.spec() {
        Some(CostSpec::Quadratic { weight }) => {
            let w = linalg::from_rows(&weight).ok_or_else(|| SynthesisError::Dimension("ragged weight".into()))?;
            match w.try_inverse() {
                Some(w_inv) => FeedbackLaw::Linear(w_inv * &dual_map * 0.5),
                None => FeedbackLaw::DualGradient(DualFunction::new(r.clone())),
            }
        }
        _ => FeedbackLaw::DualGradient(DualFunction::new(r.clone())),
    };
    Ok(Controller { a: system.a.clone(), b: system.b.clone(), m: m.clone(), dual_map, law })
}
