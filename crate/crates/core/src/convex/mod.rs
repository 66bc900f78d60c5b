//! Convex cost functions and the algebra built on them: Bregman
//! divergences, Fenchel conjugates and gradient inversion.
//!
//! Every cost that enters the controller design (state cost `q`, control
//! cost `r`, Lyapunov function `p = q + xᵀMx` and their duals) implements
//! [`ConvexFunction`]. Values are extended-real: points outside the
//! effective domain evaluate to `+∞` rather than an error, which keeps the
//! numeric conjugation routines uniform across hard-constrained costs such
//! as the bang-bang input budget.

mod bregman;
mod catalog;
mod compose;
mod dual;
mod scalar;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use crate::linalg::{Matrix, Vector};
pub use bregman::{
    completion_of_squares, eval_bregman, expectation_decomposition_check, law_of_cosines_residual, CompletionReport,
    ExpectationReport,
};
pub use catalog::{
    BoxedQuadratic, BoxedQuadraticDual, CostSpec, ElasticNet, ElasticNetDual, ExpCost, ExpCostDual,
    ExpSum, NegativeEntropy, Quadratic,
};
pub use compose::{
    add_quadratic, NumericConjugate, RiccatiDual, Scaled, ShiftedByQuadratic, Sum, Tabulated,
};
pub use dual::{dual_gradient, dual_value, DualFunction, DualOptions};
pub(crate) use scalar::golden_max;

/// Shared handle to a convex function.
pub type CostFn = Arc<dyn ConvexFunction>;

/// How a function's values are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    AnalyticClosedForm,
    PiecewiseClosedForm,
    NumericBiconjugate,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("point {point:?} lies outside the effective domain of {function}")]
    Domain { function: String, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("conjugate supremum is unbounded at {direction:?}")]
    UnboundedDual { direction: Vec<f64> },
    #[error("{target:?} lies outside the range of the gradient")]
    OutOfRange { target: Vec<f64> },
    #[error("numeric solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("too few samples: {0} (at least 1000 required)")]
    TooFewSamples(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, ConvexError>;

/// A closed convex function on `ℝⁿ`, possibly extended-valued.
///
/// Implementations must be pure; they are shared across threads.
pub trait ConvexFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn kind(&self) -> FunctionKind;

    /// `φ(x)`, or `+∞` outside the effective domain.
    fn value(&self, x: &Vector) -> Result<f64>;

    /// The minimum-norm element of the subdifferential at `x`.
    fn gradient(&self, x: &Vector) -> Result<Vector>;

    /// `∇²φ(x)`, or `None` where the Hessian is only distributional
    /// (kinks) or `x` is outside the domain.
    fn hessian(&self, x: &Vector) -> Option<Matrix>;

    /// The element of `∂φ(x)` closest to `target`. Smooth functions return
    /// the gradient.
    fn nearest_subgradient(&self, x: &Vector, _target: &Vector) -> Result<Vector> {
        self.gradient(x)
    }

    /// Closed-form Fenchel conjugate, when one is known.
    fn conjugate(&self) -> Option<CostFn> {
        None
    }

    /// A point in the interior of the domain used to start numeric solvers.
    fn interior_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }

    /// True when the effective domain is bounded, so the conjugate grows
    /// only linearly and admits no quadratic lower bound.
    fn bounded_domain(&self) -> bool {
        false
    }

    /// Catalog description, when this function belongs to a registered family.
    fn spec(&self) -> Option<CostSpec> {
        None
    }

    fn name(&self) -> String;
}

impl dyn ConvexFunction + '_ {
    /// Scalar convenience: `φ(x)` for one-dimensional functions.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.value(&crate::linalg::scalar(x))
    }

    pub fn gradient_at(&self, x: f64) -> Result<f64> {
        Ok(self.gradient(&crate::linalg::scalar(x))?[0])
    }

    pub fn in_domain(&self, x: &Vector) -> bool {
        matches!(self.value(x), Ok(v) if v.is_finite())
    }
}

pub(crate) fn check_dim(expected: usize, x: &Vector) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(ConvexError::Dimension { expected, got: x.len() })
    }
}
