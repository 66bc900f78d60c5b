use std::sync::Arc;

use bregman_control::convex::{
    completion_of_squares, dual_gradient, dual_value, eval_bregman, expectation_decomposition_check,
    law_of_cosines_residual, BoxedQuadratic, ConvexError, ConvexFunction, CostFn, DualFunction, ElasticNet, ExpCost,
    FunctionKind, NegativeEntropy, NumericConjugate, Quadratic,
};
use bregman_control::linalg::scalar;
use bregman_control::{Matrix, NoiseFamily, NoiseModel, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn half_norm(n: usize) -> CostFn {
    Arc::new(Quadratic::new(Matrix::identity(n, n) * 0.5).unwrap())
}

/// `x⁴`, defined here so the test does not rely on the catalog.
#[derive(Debug)]
struct Quartic;

impl ConvexFunction for Quartic {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> FunctionKind {
        FunctionKind::AnalyticClosedForm
    }
    fn value(&self, x: &Vector) -> Result<f64, ConvexError> {
        Ok(x[0].powi(4))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector, ConvexError> {
        Ok(scalar(4.0 * x[0].powi(3)))
    }
    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_element(1, 1, 12.0 * x[0] * x[0]))
    }
    fn name(&self) -> String {
        "quartic".into()
    }
}

#[test]
fn bregman_examples() {
    let q = half_norm(2);
    assert!((eval_bregman(q.as_ref(), &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
    let h = NegativeEntropy { dim: 2 };
    assert_eq!(eval_bregman(&h, &v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
    let kl = eval_bregman(&h, &v(&[2.0, 1.0]), &v(&[1.0, 1.0])).unwrap();
    assert!((kl - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
    assert!(matches!(eval_bregman(&h, &v(&[-1.0, 1.0]), &v(&[1.0, 1.0])), Err(ConvexError::Domain { .. })));
}

#[test]
fn dual_examples() {
    let q = half_norm(2);
    assert!((dual_value(&q, &v(&[3.0, 4.0])).unwrap() - 12.5).abs() < 1e-12);
    let g = dual_gradient(&q, &v(&[3.0, -4.0])).unwrap();
    assert!((g - v(&[3.0, -4.0])).amax() < 1e-12);
    let e: CostFn = Arc::new(ExpCost);
    let numeric = DualFunction::numeric(e.clone());
    assert!((numeric.value(&scalar(1.0)).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9);
    assert!((numeric.gradient(&scalar(std::f64::consts::E - 1.0)).unwrap()[0] - 1.0).abs() < 1e-9);
    for f in [e, q.clone(), Arc::new(ElasticNet::new(1.0, 0.1, 1).unwrap()) as CostFn] {
        let z = Vector::zeros(f.dim());
        assert_eq!(dual_value(&f, &z).unwrap(), 0.0);
        assert_eq!(dual_gradient(&f, &z).unwrap().amax(), 0.0);
    }
}

#[test]
fn bounded_domain_dual_gradient_hits_boundary() {
    let r: CostFn = Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap());
    let d = DualFunction::numeric(r);
    assert!((d.gradient(&scalar(20.0)).unwrap()[0] - 4.0).abs() < 1e-9);
    assert!((d.gradient(&scalar(-20.0)).unwrap()[0] + 4.0).abs() < 1e-9);
    assert!((d.gradient(&scalar(3.0)).unwrap()[0] - 1.5).abs() < 1e-9);
}

#[test]
fn fenchel_young_equality_and_inversion() {
    let fns: Vec<CostFn> = vec![
        Arc::new(ExpCost),
        Arc::new(Quadratic::new(Matrix::from_element(1, 1, 2.5)).unwrap()),
        Arc::new(ElasticNet::new(1.0, 0.3, 1).unwrap()),
    ];
    for f in fns {
        let numeric = DualFunction::numeric(f.clone());
        for x in [-3.0, -0.7, 0.2, 1.1, 4.0] {
            let g = f.gradient(&scalar(x)).unwrap();
            let fy = numeric.value(&g).unwrap();
            let want = x * g[0] - f.value(&scalar(x)).unwrap();
            assert!((fy - want).abs() <= 1e-8 * (1.0 + want.abs()), "{} at {x}", f.name());
            let back = numeric.gradient(&g).unwrap();
            assert!((f.gradient(&back).unwrap()[0] - g[0]).abs() <= 1e-8 * (1.0 + g[0].abs()));
        }
    }
}

#[test]
fn assumption_one_holds_for_catalog() {
    let fns: Vec<CostFn> = vec![
        Arc::new(ExpCost),
        half_norm(1),
        Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap()),
        Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap()),
    ];
    for f in fns {
        assert_eq!(f.value(&scalar(0.0)).unwrap(), 0.0);
        assert_eq!(f.gradient(&scalar(0.0)).unwrap()[0], 0.0);
        let h = 1e-3;
        for i in -300..=300 {
            let x = i as f64 * 0.0125;
            let (a, b, c) = (f.value(&scalar(x - h)), f.value(&scalar(x)), f.value(&scalar(x + h)));
            let (Ok(a), Ok(b), Ok(c)) = (a, b, c) else { continue };
            assert_eq!(b, f.value(&scalar(-x)).unwrap(), "{} not even at {x}", f.name());
            assert!(a - 2.0 * b + c >= -1e-12, "{} not convex at {x}", f.name());
        }
    }
}

#[test]
fn biconjugation_recovers_primal() {
    let f: CostFn = Arc::new(ExpCost);
    let dual: CostFn = Arc::new(DualFunction::numeric(f.clone()));
    let bi = NumericConjugate::new(dual);
    for x in [-4.0, -1.0, -0.1, 0.0, 0.5, 2.0, 6.0] {
        let want = f.value(&scalar(x)).unwrap();
        assert!((bi.value(&scalar(x)).unwrap() - want).abs() <= 1e-8 * (1.0 + want), "at {x}");
    }
}

#[test]
fn hessian_inverse_identity() {
    let f: CostFn = Arc::new(ExpCost);
    let d = DualFunction::numeric(f.clone());
    for xi in [-30.0, -2.0, 0.5, 3.0, 100.0] {
        let u = d.gradient(&scalar(xi)).unwrap();
        let prod = f.hessian(&u).unwrap()[(0, 0)] * d.hessian(&scalar(xi)).unwrap()[(0, 0)];
        assert!((prod - 1.0).abs() < 1e-6, "{xi}: {prod}");
    }
    let w = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let q: CostFn = Arc::new(Quadratic::new(w).unwrap());
    let d = DualFunction::numeric(q.clone());
    let xi = v(&[0.3, -1.2]);
    let prod = q.hessian(&d.gradient(&xi).unwrap()).unwrap() * d.hessian(&xi).unwrap();
    assert!((prod - Matrix::identity(2, 2)).amax() < 1e-6);
}

#[test]
fn completion_of_squares_for_quadratics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let mut spd = || {
            let l = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            &l * l.transpose() + Matrix::identity(2, 2) * 0.2
        };
        let p1: CostFn = Arc::new(Quadratic::new(spd()).unwrap());
        let p2: CostFn = Arc::new(Quadratic::new(spd()).unwrap());
        let mut pt = || v(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let (x, y, z) = (pt(), pt(), pt());
        let rep = completion_of_squares(&p1, &p2, &x, &y, &z).unwrap();
        assert!((rep.lhs - rep.rhs).abs() <= 1e-9 * rep.lhs.abs().max(1.0), "{rep:?}");
    }
}

#[test]
fn law_of_cosines_for_exp_cost() {
    for (x, y, z) in [(1.0, -2.0, 0.5), (3.0, 0.1, -0.4), (-1.5, 2.5, 4.0)] {
        let r = law_of_cosines_residual(&ExpCost, &scalar(x), &scalar(y), &scalar(z)).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }
}

#[test]
fn expectation_decomposition_quartic_uniform() {
    let noise = NoiseModel::new(NoiseFamily::Uniform, Matrix::from_element(1, 1, 1.0 / 3.0)).unwrap();
    let rep = expectation_decomposition_check(&Quartic, &noise, &scalar(1.0), 1_000_000, 11).unwrap();
    assert!(rep.residual <= 4.0 * rep.std_error, "{rep:?}");
    // Simpson on w ∈ [−1, 1] with density ½: D(1, −w) = 1 − w⁴ + 4w³(1 + w) − ... expanded numerically.
    let d = |w: f64| Quartic.value(&scalar(1.0)).unwrap() - w.powi(4) - (-4.0 * w.powi(3)) * (1.0 + w);
    let n = 2000;
    let h = 2.0 / n as f64;
    let mut acc = d(-1.0) + d(1.0);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * d(-1.0 + i as f64 * h);
    }
    let integral = acc * h / 3.0 * 0.5;
    assert!((rep.lhs - integral).abs() <= 0.01 * integral, "{} vs {integral}", rep.lhs);
}

#[test]
fn expectation_at_origin_is_constant() {
    let noise = NoiseModel::new(NoiseFamily::Gaussian, Matrix::from_element(1, 1, 1.0)).unwrap();
    let q = Quadratic::new(Matrix::from_element(1, 1, 1.0)).unwrap();
    let rep = expectation_decomposition_check(&q, &noise, &scalar(0.0), 5000, 3).unwrap();
    assert_eq!(rep.lhs, rep.constant);
    assert!(matches!(expectation_decomposition_check(&q, &noise, &scalar(0.0), 999, 3), Err(ConvexError::TooFewSamples(999))));
}
