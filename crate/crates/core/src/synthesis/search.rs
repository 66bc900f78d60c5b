//! Search for a feasible `M`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    check_m_given_q, check_m_given_r, checks::riccati_residual, CertificateParams, CostTriple, FeasibilityReport,
    GridSpec, Mode, Result, Route, SynthesisCertificate, SynthesisError,
};
use crate::convex::{add_quadratic, CostFn};
use crate::linalg::{self, Matrix, Vector};
use crate::system::LinearSystem;
use crate::tolerances::{relative_residual, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Largest feasible `m` (scalar) or largest feasible scaling of `M`.
    #[default]
    MaxMScalar,
    MinTrace,
    MaxMargin,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub route: Route,
    pub m_lo: f64,
    pub m_hi: f64,
    pub scan_points: usize,
    /// Feasibility-check budget for the matrix pattern search.
    pub max_evaluations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            tolerances: Tolerances::default(),
            route: Route::Auto,
            m_lo: 1e-6,
            m_hi: 1e3,
            scan_points: 91,
            max_evaluations: 400,
        }
    }
}

struct Checker<'a> {
    system: &'a LinearSystem,
    cost: &'a CostFn,
    mode: Mode,
    opts: &'a SearchOptions,
}

impl Checker<'_> {
    fn check(&self, m: &Matrix) -> Result<FeasibilityReport> {
        match self.mode {
            Mode::StateCostFirst => check_m_given_q(self.system, self.cost, m, &self.opts.grid),
            Mode::ControlCostFirst => check_m_given_r(self.system, self.cost, m, &self.opts.grid, self.opts.route),
        }
    }

    /// Smallest margin, with `−∞` when the candidate is rejected outright.
    fn score(&self, m: &Matrix) -> Result<f64> {
        match self.check(m) {
            Ok(rep) => Ok(rep.min_margin()),
            Err(SynthesisError::InvalidM) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn accept(&self, score: f64) -> bool {
        score >= self.opts.tolerances.margin_floor
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Bisection on `log m` between an accepted and a rejected value.
fn bisect(chk: &Checker, mut good: f64, mut bad: f64, unit: &Matrix) -> Result<f64> {
    for _ in 0..200 {
        if (good - bad).abs() <= 1e-9 * good.abs().min(bad.abs()) {
            break;
        }
        let mid = (good * bad).sqrt();
        if chk.accept(chk.score(&(unit * mid))?) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Searches a scale `s` for `M = s·base` along a log grid, then refines.
fn search_scale(chk: &Checker, base: &Matrix, objective: Objective) -> Result<std::result::Result<f64, (f64, f64)>> {
    let opts = chk.opts;
    let scales = log_space(opts.m_lo, opts.m_hi, opts.scan_points.max(2));
    let scores: Vec<f64> = scales.iter().map(|s| chk.score(&(base * *s))).collect::<Result<_>>()?;
    let feasible: Vec<usize> = (0..scales.len()).filter(|i| chk.accept(scores[*i])).collect();
    let Some(&first) = feasible.first() else {
        let (i, best) = scores.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc });
        return Ok(Err((scales[i], best)));
    };
    let last = *feasible.last().unwrap();
    let s = match objective {
        Objective::MaxMScalar => {
            if last + 1 == scales.len() {
                scales[last]
            } else {
                bisect(chk, scales[last], scales[last + 1], base)?
            }
        }
        Objective::MinTrace => {
            if first == 0 {
                scales[0]
            } else {
                bisect(chk, scales[first], scales[first - 1], base)?
            }
        }
        Objective::MaxMargin => {
            let i = *feasible.iter().max_by(|a, b| scores[**a].total_cmp(&scores[**b])).unwrap();
            let lo = scales[i.saturating_sub(1)].ln();
            let hi = scales[(i + 1).min(scales.len() - 1)].ln();
            let objective = |t: f64| -> crate::convex::Result<f64> {
                let sc = chk.score(&(base * t.exp())).map_err(|e| crate::convex::ConvexError::Parameter(e.to_string()))?;
                Ok(if chk.accept(sc) { sc } else { f64::NEG_INFINITY })
            };
            let (t, v) = crate::convex::golden_max(objective, lo, hi)?;
            if v >= scores[i] {
                t.exp()
            } else {
                scales[i]
            }
        }
    };
    Ok(Ok(s))
}

/// `M = diag(exp θ) + vvᵀ`.
fn assemble(theta: &[f64], n: usize) -> Matrix {
    let d = Matrix::from_diagonal(&Vector::from_iterator(n, theta[..n].iter().map(|t| t.exp())));
    let v = Vector::from_column_slice(&theta[n..]);
    d + &v * v.transpose()
}

/// Pattern search on `(θ, v)` maximizing (or, once feasible, trading off)
/// the objective.
fn pattern_search(chk: &Checker, start: &Matrix, objective: Objective) -> Result<(Matrix, f64)> {
    let n = start.nrows();
    let mut theta: Vec<f64> = (0..n).map(|i| start[(i, i)].max(1e-12).ln()).chain(std::iter::repeat_n(0.0, n)).collect();
    let value = |score: f64, m: &Matrix| -> f64 {
        match objective {
            Objective::MinTrace if chk.accept(score) => 1e6 - m.trace(),
            Objective::MaxMScalar if chk.accept(score) => 1e6 + m.trace(),
            _ => score,
        }
    };
    let mut m = assemble(&theta, n);
    let mut score = chk.score(&m)?;
    let mut best = value(score, &m);
    let mut step = 0.5;
    let mut evals = 0;
    while step > 1e-4 && evals < chk.opts.max_evaluations {
        let mut improved = false;
        for k in 0..theta.len() {
            for dir in [1.0, -1.0] {
                let mut cand = theta.clone();
                cand[k] += dir * step;
                let cm = assemble(&cand, n);
                let cs = chk.score(&cm)?;
                evals += 1;
                let cv = value(cs, &cm);
                if cv > best && (chk.accept(cs) || !chk.accept(score)) {
                    theta = cand;
                    m = cm;
                    score = cs;
                    best = cv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((m, score))
}

fn build_costs(system: &LinearSystem, cost: &CostFn, m: &Matrix, mode: Mode, grid: &GridSpec) -> Result<CostTriple> {
    match mode {
        Mode::StateCostFirst => {
            let r = super::derive_r_from_q(system, cost, m, grid)?;
            Ok(CostTriple { q: cost.clone(), r, p: add_quadratic(cost, m)? })
        }
        Mode::ControlCostFirst => {
            let (q, p) = super::derive_q_from_r(system, cost, m, grid)?;
            Ok(CostTriple { q, r: cost.clone(), p })
        }
    }
}

/// Finds a feasible `M` for the fixed cost and returns its certificate.
///
/// Scalar systems scan `m` on a log grid and refine by bisection; larger
/// systems run a pattern search over diagonal-plus-rank-one matrices. The
/// derived costs are built and the Riccati-like identity re-checked before
/// returning.
pub fn search_m(
    system: &LinearSystem,
    fixed_cost: &CostFn,
    mode: Mode,
    objective: Objective,
    opts: &SearchOptions,
) -> Result<SynthesisCertificate> {
    let n = system.state_dim();
    let chk = Checker { system, cost: fixed_cost, mode, opts };
    let unit = Matrix::identity(n, n);
    let m = match search_scale(&chk, &unit, objective)? {
        Ok(s) if n == 1 => unit * s,
        Ok(s) => pattern_search(&chk, &(unit * s), objective)?.0,
        Err((s, best)) if n == 1 => {
            return Err(SynthesisError::Infeasible { best_margin: best, best_m: vec![vec![s]] });
        }
        Err((s, _)) => {
            let (m, score) = pattern_search(&chk, &(unit * s), Objective::MaxMargin)?;
            if !chk.accept(score) {
                return Err(SynthesisError::Infeasible { best_margin: score, best_m: linalg::to_rows(&m) });
            }
            m
        }
    };
    let m = linalg::symmetrize(&m);
    let report = chk.check(&m)?;
    if !chk.accept(report.min_margin()) {
        return Err(SynthesisError::Infeasible { best_margin: report.min_margin(), best_m: linalg::to_rows(&m) });
    }
    let costs = build_costs(system, fixed_cost, &m, mode, &opts.grid)?;
    // Re-validate the identity on a few dual points before emitting.
    let a_inv_t = system.a_inverse().ok_or(SynthesisError::SingularA)?.transpose();
    let quad = &system.a * m.clone().try_inverse().ok_or(SynthesisError::InvalidM)? * system.a.transpose();
    for x in opts.grid.verification_states(n).iter().step_by(40) {
        let xi = &a_inv_t * &m * x * 2.0;
        let res = riccati_residual(system, &costs, &m, &xi)?;
        let scale = 0.25 * xi.dot(&(&quad * &xi));
        if relative_residual(res + scale, scale) > opts.tolerances.riccati {
            return Err(SynthesisError::InfeasibleDerivation {
                function: "Riccati-like identity".into(),
                worst: res,
                at: xi.iter().copied().collect(),
            });
        }
    }
    let mut margins: BTreeMap<String, f64> = report.margins.clone();
    if let Some(v) = &report.numeric_convexity {
        margins.insert("numeric_convexity".into(), v.worst_curvature);
    }
    let spec = fixed_cost
        .spec()
        .ok_or_else(|| SynthesisError::Unsupported(format!("{} has no catalog description", fixed_cost.name())))?;
    let family = spec.family_name().to_string();
    let params = CertificateParams {
        fixed_cost: spec,
        family: None,
        objective: Some(objective),
        route: report.route,
    };
    Ok(SynthesisCertificate::new(system, &m, mode, family, params, margins, opts.grid, opts.tolerances)
        .with_costs(costs))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::convex::{BoxedQuadratic, ElasticNet, Quadratic};

    fn s(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn elastic_net_boundary() {
        let sys = LinearSystem::deterministic(s(1.2), s(1.0)).unwrap();
        let q: CostFn = Arc::new(ElasticNet::new(1.0, 0.01, 1).unwrap());
        let cert = search_m(&sys, &q, Mode::StateCostFirst, Objective::MaxMScalar, &SearchOptions::default()).unwrap();
        let expected = 1.44 * 0.01 / (1.0 - 0.72);
        assert!((cert.m[0][0] - expected).abs() < 1e-6, "{}", cert.m[0][0]);
    }

    #[test]
    fn dead_system_is_infeasible() {
        let sys = LinearSystem::deterministic(s(0.0), s(1.0)).unwrap();
        let q: CostFn = Arc::new(Quadratic::new(s(1.0)).unwrap());
        let r = search_m(&sys, &q, Mode::StateCostFirst, Objective::MaxMScalar, &SearchOptions::default());
        assert!(matches!(r, Err(SynthesisError::Infeasible { .. })), "{r:?}");
    }

    #[test]
    fn bang_bang_interval_contains_paper_value() {
        let sys = LinearSystem::deterministic(s(0.9), s(0.1)).unwrap();
        let r: CostFn = Arc::new(BoxedQuadratic::new(1.0, 4.0).unwrap());
        let opts = SearchOptions { m_hi: 10.0, ..Default::default() };
        let cert = search_m(&sys, &r, Mode::ControlCostFirst, Objective::MaxMScalar, &opts).unwrap();
        // Feasible interval is (0, a²/b²] = (0, 81]; the scan stops at m_hi.
        assert_eq!(cert.m[0][0], 10.0);
        assert!(check_m_given_r(&sys, &r, &s(0.7), &opts.grid, Route::Auto).unwrap().feasible);
    }

    #[test]
    fn matrix_search_finds_feasible_quadratic_design() {
        let a = Matrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.9]);
        let sys = LinearSystem::deterministic(a, Matrix::identity(2, 2)).unwrap();
        let q: CostFn = Arc::new(Quadratic::new(Matrix::identity(2, 2)).unwrap());
        let opts = SearchOptions { max_evaluations: 120, ..Default::default() };
        let cert = search_m(&sys, &q, Mode::StateCostFirst, Objective::MaxMargin, &opts).unwrap();
        let m = cert.m_matrix().unwrap();
        assert!(linalg::is_positive_definite(&m));
        assert!(cert.margins.iter().filter(|(k, _)| *k != "numeric_convexity").all(|(_, v)| *v >= 1e-8));
    }
}
