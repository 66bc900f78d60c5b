use bregman_control::families::{
    bangbang_family, elasticnet_family, exponential_family, family, BangBangStateCost, ElasticNetControlCost,
    FamilyError, FamilyKind, ScalarFamilyParams,
};
use bregman_control::linalg::scalar;
use bregman_control::sim::rollout;
use bregman_control::synthesis::build_controller;

fn bb() -> ScalarFamilyParams {
    ScalarFamilyParams { a: 0.9, b: 0.1, m: 0.7, t: Some(4.0), eps: None }
}

fn ex() -> ScalarFamilyParams {
    ScalarFamilyParams { a: 0.99, b: 1.0, m: 0.3, t: None, eps: None }
}

fn en(m: f64) -> ScalarFamilyParams {
    ScalarFamilyParams { a: 1.2, b: 1.0, m, t: None, eps: Some(0.01) }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

#[test]
fn elastic_net_printed_law_matches_dual_gradient_on_both_branches() {
    for m in [0.01, 0.03, 0.07] {
        let fam = elasticnet_family(en(m)).unwrap();
        let dual = build_controller(&fam.system, &fam.r, &fam.m()).unwrap();
        let edge = 1.2 / (2.0 * m);
        for x in linspace(-3.0 * edge, 3.0 * edge, 2001) {
            let printed = fam.controller.feedback(&scalar(x)).unwrap()[0];
            let numeric = dual.feedback(&scalar(x)).unwrap()[0];
            assert!((printed - numeric).abs() <= 1e-6 * printed.abs().max(1.0), "m={m} x={x}: {printed} vs {numeric}");
        }
    }
}

#[test]
fn exponential_printed_law_matches_dual_gradient() {
    let fam = exponential_family(ex()).unwrap();
    let dual = build_controller(&fam.system, &fam.r, &fam.m()).unwrap();
    for x in linspace(-10.0, 10.0, 2001) {
        let printed = fam.controller.feedback(&scalar(x)).unwrap()[0];
        let numeric = dual.feedback(&scalar(x)).unwrap()[0];
        assert!((printed - numeric).abs() <= 1e-8, "x={x}");
    }
}

#[test]
fn bang_bang_printed_law_agrees_inside_and_saturates_at_a_outside() {
    let fam = bangbang_family(bb()).unwrap();
    let dual = build_controller(&fam.system, &fam.r, &fam.m()).unwrap();
    let edge = 0.9 * 4.0 / (0.1 * 0.7);
    for x in linspace(-edge, edge, 2001) {
        let printed = fam.controller.feedback(&scalar(x)).unwrap()[0];
        assert!((printed - dual.feedback(&scalar(x)).unwrap()[0]).abs() <= 1e-9, "x={x}");
    }
    // Beyond the threshold the printed law gives −a·sign(x) while the
    // dual-gradient law saturates at the budget t.
    let x = 2.0 * edge;
    assert_eq!(fam.controller.feedback(&scalar(x)).unwrap()[0], -0.9);
    assert!((dual.feedback(&scalar(x)).unwrap()[0] + 4.0).abs() < 1e-9);
}

#[test]
fn printed_costs_are_continuous_at_breakpoints() {
    let q = BangBangStateCost { a: 0.9, b: 0.1, m: 0.7, t: 4.0 };
    let x = q.breakpoint();
    assert!((q.inner(x) - q.outer(x)).abs() <= 1e-9 * q.inner(x).max(1.0));
    for m in [0.01, 0.07] {
        let r = ElasticNetControlCost { a: 1.2, b: 1.0, m, eps: 0.01 };
        let u = r.breakpoint();
        assert!((r.inner(u) - r.outer(u)).abs() <= 1e-9 * r.inner(u).max(1.0));
        let fam = elasticnet_family(en(m)).unwrap();
        let edge = 1.2 / (2.0 * m);
        let below = fam.controller.feedback(&scalar(edge * (1.0 - 1e-12))).unwrap()[0];
        let above = fam.controller.feedback(&scalar(edge * (1.0 + 1e-12))).unwrap()[0];
        assert!((below - above).abs() < 1e-9);
    }
}

#[test]
fn noiseless_closed_loops_converge_from_ten() {
    for fam in [bangbang_family(bb()).unwrap(), exponential_family(ex()).unwrap(), elasticnet_family(en(0.01)).unwrap()] {
        let t = rollout(&fam.system, &fam.controller, &scalar(10.0), 200, 0).unwrap();
        assert!(t.states.iter().any(|x| x[0].abs() < 1e-3), "{:?}", fam.kind);
    }
}

#[test]
fn spec_example_values() {
    let b = bangbang_family(bb()).unwrap();
    assert!((b.controller.feedback(&scalar(10.0)).unwrap()[0] + 0.7777777777777778).abs() < 1e-12);
    assert_eq!(b.controller.feedback(&scalar(100.0)).unwrap()[0], -0.9);
    let e = elasticnet_family(en(0.07)).unwrap();
    assert!((e.controller.feedback(&scalar(10.0)).unwrap()[0] + 10.958333333333334).abs() < 1e-9);
    for f in [b, e, exponential_family(ex()).unwrap()] {
        assert_eq!(f.controller.feedback(&scalar(0.0)).unwrap()[0], 0.0);
    }
}

#[test]
fn family_lookup_and_validation() {
    assert_eq!(family(FamilyKind::ElasticNet, en(0.01)).unwrap().kind, FamilyKind::ElasticNet);
    let err = family(FamilyKind::ElasticNet, ScalarFamilyParams { a: 0.5, m: 0.5, ..en(0.5) }).unwrap_err();
    assert!(matches!(err, FamilyError::Infeasible { inequality: "a²(ε+m) − m > 0", .. }));
    let err = family(FamilyKind::BangBang, ScalarFamilyParams { b: 0.0, ..bb() }).unwrap_err();
    assert!(err.to_string().contains("b ≠ 0"));
    let err = family(FamilyKind::Exponential, ScalarFamilyParams { a: 0.0, ..ex() }).unwrap_err();
    assert!(err.to_string().contains("a ≠ 0"));
    let params: ScalarFamilyParams = serde_json::from_str(r#"{"a": 0.9, "b": 0.1, "m": 0.7, "t": 4}"#).unwrap();
    assert_eq!(params, bb());
    assert!(serde_json::from_str::<ScalarFamilyParams>(r#"{"a": 1, "b": 1, "m": 1, "k": 2}"#).is_err());
}

#[test]
fn exponential_state_cost_is_even_convex_and_positive() {
    let fam = exponential_family(ex()).unwrap();
    assert!(fam.q.value(&scalar(0.0)).unwrap().abs() < 1e-9);
    let h = 0.05;
    for i in 1..400 {
        let x = i as f64 * 0.25;
        let v = fam.q.value(&scalar(x)).unwrap();
        assert!(v > 0.0);
        assert!((v - fam.q.value(&scalar(-x)).unwrap()).abs() <= 1e-12 * v.max(1.0));
        let d2 = fam.q.value(&scalar(x - h)).unwrap() - 2.0 * v + fam.q.value(&scalar(x + h)).unwrap();
        assert!(d2 >= -1e-9 * v.max(1.0), "x={x}");
    }
}
