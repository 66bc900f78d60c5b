use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{CliError, Format, Invocation, RunConfig, SimulationConfig};
use crate::convex::ConvexFunction;
use crate::families::{self, Family, ScalarFamilyParams};
use crate::lqr::solve_dare;
use crate::sim::{self, evaluate_cost, rollout, write_trajectory_csv};
use crate::synthesis::{
    self, check_m_given_q, check_m_given_r, search_m, verify_certificate, Controller, CostTriple, Mode, Property,
    SearchOptions, SynthesisCertificate, SynthesisError,
};
use crate::system::LinearSystem;
use crate::{linalg, Matrix, Vector};

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn synthesis_error(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::Infeasible { .. }
        | SynthesisError::InfeasibleDerivation { .. }
        | SynthesisError::InsufficientHypotheses(_) => CliError::Infeasible(e.to_string()),
        SynthesisError::Dimension(_) | SynthesisError::InvalidM | SynthesisError::SingularA => {
            CliError::Config(e.to_string())
        }
        other => CliError::Runtime(other.to_string()),
    }
}

fn search_options(cfg: &RunConfig) -> SearchOptions {
    let s = &cfg.synthesis;
    let d = SearchOptions::default();
    SearchOptions {
        grid: s.grid,
        tolerances: s.tolerances,
        route: s.route,
        m_lo: s.m_lo.unwrap_or(d.m_lo),
        m_hi: s.m_hi.unwrap_or(d.m_hi),
        ..d
    }
}

fn family_at(cfg: &RunConfig, system: &LinearSystem, m: f64) -> Result<Option<Family>, CliError> {
    let Some(fc) = &cfg.cost.family else { return Ok(None) };
    if cfg.cost.mode != super::CostMode::Family {
        return Ok(None);
    }
    let params = ScalarFamilyParams { a: system.a[(0, 0)], b: system.b[(0, 0)], m, t: fc.t, eps: fc.eps };
    families::family(fc.name, params).map(Some).map_err(|e| CliError::Infeasible(e.to_string()))
}

/// Validates an explicit `M` and builds its certificate.
fn certify_explicit(cfg: &RunConfig, system: &LinearSystem, m: &Matrix) -> Result<SynthesisCertificate, CliError> {
    let det = LinearSystem::deterministic(system.a.clone(), system.b.clone()).map_err(runtime)?;
    let s = &cfg.synthesis;
    if let Some(fam) = family_at(cfg, &det, m[(0, 0)])? {
        let cert = fam.certificate(s.grid, s.tolerances).map_err(|e| CliError::Infeasible(e.to_string()))?;
        let worst = cert.margins.iter().filter(|(k, _)| *k != "numeric_convexity").map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        if worst < s.tolerances.margin_floor.min(0.0) {
            return Err(CliError::Infeasible(format!("M fails the feasibility condition; margins {:?}", cert.margins)));
        }
        return Ok(cert);
    }
    let (mode, spec) = cfg.design();
    let dim = match mode {
        Mode::StateCostFirst => det.state_dim(),
        Mode::ControlCostFirst => det.input_dim(),
    };
    let fixed = spec.build(dim).map_err(|e| CliError::Config(e.to_string()))?;
    let report = match mode {
        Mode::StateCostFirst => check_m_given_q(&det, &fixed, m, &s.grid),
        Mode::ControlCostFirst => check_m_given_r(&det, &fixed, m, &s.grid, s.route),
    }
    .map_err(synthesis_error)?;
    if !report.feasible {
        return Err(CliError::Infeasible(format!("M fails the feasibility condition; margins {:?}", report.margins)));
    }
    let mut margins = report.margins.clone();
    if let Some(v) = &report.numeric_convexity {
        margins.insert("numeric_convexity".into(), v.worst_curvature);
    }
    let params = synthesis::CertificateParams { fixed_cost: spec.clone(), family: None, objective: None, route: report.route };
    let cert = SynthesisCertificate::new(&det, m, mode, spec.family_name().into(), params, margins, s.grid, s.tolerances);
    cert.costs().map_err(synthesis_error)?;
    Ok(cert)
}

/// The certificate named by the config: a file from an earlier run or an
/// explicit `M`. Returns a config error when neither is given.
pub fn load_certificate(cfg: &RunConfig, system: &LinearSystem) -> Result<SynthesisCertificate, CliError> {
    if let Some(path) = &cfg.synthesis.certificate {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cert = SynthesisCertificate::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cert.a != cfg.system.a || cert.b != cfg.system.b {
            return Err(CliError::Config("certificate system does not match system.A / system.B".into()));
        }
        return Ok(cert);
    }
    match cfg.explicit_m() {
        Some(m) => certify_explicit(cfg, system, &m),
        None => Err(CliError::Config("no certificate: set synthesis.M or synthesis.certificate".into())),
    }
}

fn synthesize_certificate(cfg: &RunConfig, system: &LinearSystem) -> Result<SynthesisCertificate, CliError> {
    if cfg.synthesis.certificate.is_some() || cfg.synthesis.m.is_some() {
        return load_certificate(cfg, system);
    }
    let det = LinearSystem::deterministic(system.a.clone(), system.b.clone()).map_err(runtime)?;
    let (mode, spec) = cfg.design();
    let dim = match mode {
        Mode::StateCostFirst => det.state_dim(),
        Mode::ControlCostFirst => det.input_dim(),
    };
    let fixed = spec.build(dim).map_err(|e| CliError::Config(e.to_string()))?;
    let cert = search_m(&det, &fixed, mode, cfg.synthesis.objective, &search_options(cfg)).map_err(synthesis_error)?;
    match family_at(cfg, &det, cert.m[0][0])? {
        Some(fam) => {
            let mut fc = fam.certificate(cfg.synthesis.grid, cfg.synthesis.tolerances).map_err(|e| CliError::Infeasible(e.to_string()))?;
            fc.params.objective = Some(cfg.synthesis.objective);
            Ok(fc)
        }
        None => Ok(cert),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m.iter().map(|r| r.iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>().join(", ")).collect();
    format!("[[{}]]", rows.join("], ["))
}

pub fn cmd_synthesize(cfg: &RunConfig, inv: &Invocation, out: &mut dyn Write) -> Result<(), CliError> {
    let system = cfg.system()?;
    let cert = synthesize_certificate(cfg, &system)?;
    let riccati = verify_certificate(&cert, &system, &[Property::Riccati]).map_err(synthesis_error)?;
    let dir = inv.out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("certificate.json");
    std::fs::write(&path, cert.to_json() + "\n")?;
    writeln!(out, "mode: {:?}", cert.mode)?;
    writeln!(out, "family: {}", cert.family)?;
    writeln!(out, "M: {}", fmt_matrix(&cert.m))?;
    for (k, v) in &cert.margins {
        writeln!(out, "margin {k}: {v:.6e}")?;
    }
    let r = &riccati.properties[0];
    writeln!(out, "riccati max residual: {:.3e} (tolerance {:.1e})", r.worst, r.tolerance)?;
    writeln!(out, "certificate: {}", path.display())?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CostStats {
    pub mean: f64,
    pub stderr: f64,
    pub per_seed: Vec<f64>,
}

impl CostStats {
    fn from(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, per_seed: values }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SimulationSummary {
    pub family: String,
    pub m: Vec<Vec<f64>>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub rng: String,
    pub average_cost: CostStats,
    pub max_abs_input: f64,
    pub baseline: Option<BaselineSummary>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BaselineSummary {
    pub gain: Vec<Vec<f64>>,
    pub average_cost: CostStats,
    pub max_abs_input: f64,
}

/// `½∇²f(0)`, the quadratic weight matching `f` to second order, or `I`.
fn quadratic_weight(f: &dyn ConvexFunction) -> Matrix {
    let n = f.dim();
    match f.hessian(&Vector::zeros(n)) {
        Some(h) if linalg::is_positive_definite(&(&h * 0.5)) => h * 0.5,
        _ => Matrix::identity(n, n),
    }
}

/// Controller for simulation: the printed law for closed-form families,
/// `∇r*(−2BᵀA⁻ᵀMx)` otherwise.
fn simulation_controller(cert: &SynthesisCertificate, system: &LinearSystem) -> Result<Controller, CliError> {
    if let (Some(params), Ok(kind)) = (cert.params.family, cert.family.parse()) {
        let fam = families::family(kind, params).map_err(runtime)?;
        return Ok(fam.controller);
    }
    let _ = system;
    cert.controller().map_err(synthesis_error)
}

struct SeedRun {
    seed: u64,
    cost: f64,
    max_u: f64,
    baseline: Option<(f64, f64)>,
}

fn simulate_inner(cfg: &RunConfig, inv: &Invocation, baseline: bool, out: &mut dyn Write) -> Result<SimulationSummary, CliError> {
    let sim_cfg: &SimulationConfig =
        cfg.simulation.as_ref().ok_or_else(|| CliError::Config("missing [simulation] section".into()))?;
    let system = cfg.system()?;
    let cert = load_certificate(cfg, &system)?;
    let costs: CostTriple = cert.costs().map_err(synthesis_error)?;
    let controller = simulation_controller(&cert, &system)?;
    let baseline_ctrl = if baseline || sim_cfg.baseline {
        let sol = solve_dare(&system.a, &system.b, &quadratic_weight(costs.q.as_ref()), &quadratic_weight(costs.r.as_ref()))
            .map_err(runtime)?;
        Some(Controller::linear(&system, sol.gain).map_err(runtime)?)
    } else {
        None
    };
    let dir = inv.out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let csv = cfg.output.formats.contains(&Format::Csv);
    let x0 = Vector::from_column_slice(&sim_cfg.x0);
    let seeds: Vec<u64> = sim_cfg.seeds.iter().map(|s| s.wrapping_add_signed(inv.seed_offset)).collect();

    let run_seed = |seed: u64| -> Result<SeedRun, CliError> {
        let traj = rollout(&system, &controller, &x0, sim_cfg.horizon, seed).map_err(runtime)?;
        let report = evaluate_cost(&traj, costs.q.as_ref(), costs.r.as_ref(), Some(costs.p.as_ref())).map_err(runtime)?;
        if csv {
            write_trajectory_csv(&dir.join(format!("seed_{seed}.csv")), &traj, Some(&report)).map_err(runtime)?;
        }
        let max_u = traj.inputs.iter().map(|u| u.amax()).fold(0.0, f64::max);
        let baseline = match &baseline_ctrl {
            Some(lin) => {
                let t = rollout(&system, lin, &x0, sim_cfg.horizon, seed).map_err(runtime)?;
                let rep = evaluate_cost(&t, costs.q.as_ref(), costs.r.as_ref(), Some(costs.p.as_ref())).map_err(runtime)?;
                if csv {
                    write_trajectory_csv(&dir.join(format!("seed_{seed}_lqr.csv")), &t, Some(&rep)).map_err(runtime)?;
                }
                Some((rep.average_cost, t.inputs.iter().map(|u| u.amax()).fold(0.0, f64::max)))
            }
            None => None,
        };
        Ok(SeedRun { seed, cost: report.average_cost, max_u, baseline })
    };
    let runs: Vec<SeedRun> = seeds.par_iter().map(|s| run_seed(*s)).collect::<Result<_, _>>()?;

    let summary = SimulationSummary {
        family: cert.family.clone(),
        m: cert.m.clone(),
        horizon: sim_cfg.horizon,
        seeds: runs.iter().map(|r| r.seed).collect(),
        rng: sim::RNG_NAME.into(),
        average_cost: CostStats::from(runs.iter().map(|r| r.cost).collect()),
        max_abs_input: runs.iter().map(|r| r.max_u).fold(0.0, f64::max),
        baseline: baseline_ctrl.as_ref().map(|lin| BaselineSummary {
            gain: linalg::to_rows(&-lin.gain().expect("linear law")),
            average_cost: CostStats::from(runs.iter().filter_map(|r| r.baseline.map(|b| b.0)).collect()),
            max_abs_input: runs.iter().filter_map(|r| r.baseline.map(|b| b.1)).fold(0.0, f64::max),
        }),
    };
    if cfg.output.formats.contains(&Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    writeln!(out, "family: {}", summary.family)?;
    writeln!(out, "seeds: {}  horizon: {}", summary.seeds.len(), summary.horizon)?;
    writeln!(out, "average cost: {:.6} ± {:.6}", summary.average_cost.mean, summary.average_cost.stderr)?;
    writeln!(out, "max |u|: {:.6}", summary.max_abs_input)?;
    if let Some(b) = &summary.baseline {
        writeln!(out, "lqr average cost: {:.6} ± {:.6}", b.average_cost.mean, b.average_cost.stderr)?;
    }
    writeln!(out, "output: {}", dir.display())?;
    Ok(summary)
}

pub fn cmd_simulate(cfg: &RunConfig, inv: &Invocation, out: &mut dyn Write) -> Result<SimulationSummary, CliError> {
    simulate_inner(cfg, inv, false, out)
}

/// Simulation with the LQR baseline on common random numbers.
pub fn cmd_compare(cfg: &RunConfig, inv: &Invocation, out: &mut dyn Write) -> Result<SimulationSummary, CliError> {
    let summary = simulate_inner(cfg, inv, true, out)?;
    if let Some(b) = &summary.baseline {
        let diff: Vec<f64> = summary.average_cost.per_seed.iter().zip(&b.average_cost.per_seed).map(|(x, y)| x - y).collect();
        let d = CostStats::from(diff);
        writeln!(out, "difference (bregman − lqr): {:.6} ± {:.6}", d.mean, d.stderr)?;
        let mut table = BTreeMap::new();
        table.insert("difference", d);
        if cfg.output.formats.contains(&Format::Json) {
            write_json(&inv.out_dir(cfg).join("compare.json"), &table)?;
        }
    }
    Ok(summary)
}

pub fn cmd_verify(cfg: &RunConfig, inv: &Invocation, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.verification.properties.is_empty() {
        return Err(CliError::Config("verification.properties is empty".into()));
    }
    let system = cfg.system()?;
    let cert = load_certificate(cfg, &system)?;
    let report = verify_certificate(&cert, &system, &cfg.verification.properties).map_err(|e| match e {
        SynthesisError::Unsupported(msg) => CliError::Config(msg),
        other => synthesis_error(other),
    })?;
    for p in &report.properties {
        writeln!(
            out,
            "{} {:<12} worst {:.3e}  tolerance {:.1e}  samples {}",
            if p.passed { "PASS" } else { "FAIL" },
            p.name,
            p.worst,
            p.tolerance,
            p.samples
        )?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        let dir = inv.out_dir(cfg);
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("verification.json"), &report)?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

