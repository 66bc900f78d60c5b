use super::Result;
use crate::convex::{eval_bregman, ConvexFunction, Vector};
use crate::synthesis::{lyapunov_residual, CostTriple};
use crate::system::LinearSystem;
use crate::tolerances::relative_residual;

use super::Trajectory;

/// Per-step Bregman costs of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// `D_q(x_{k+1} − w_k, −w_k)` for the transition out of step `k`.
    pub per_step_state_cost: Vec<f64>,
    /// `D_r(u_k, 0)`.
    pub per_step_control_cost: Vec<f64>,
    /// `q(x_{k+1})`, reported for comparison with the divergence summand.
    pub per_step_plain_state_cost: Vec<f64>,
    pub average_cost: f64,
    /// `p(x_k)` for `k = 0..=N`, empty when no `p` is supplied.
    pub lyapunov_values: Vec<f64>,
    /// Sample mean of `D_q(0, −w_k)`.
    pub noise_floor_estimate: f64,
}

pub fn evaluate_cost(
    trajectory: &Trajectory,
    q: &dyn ConvexFunction,
    r: &dyn ConvexFunction,
    p: Option<&dyn ConvexFunction>,
) -> Result<CostReport> {
    trajectory.check_shape()?;
    let n = trajectory.horizon();
    let zero_u = Vector::zeros(r.dim());
    let zero_x = Vector::zeros(q.dim());
    let mut state = Vec::with_capacity(n);
    let mut control = Vec::with_capacity(n);
    let mut plain = Vec::with_capacity(n);
    let mut floor = 0.0;
    for k in 0..n {
        let w = &trajectory.noises[k];
        let minus_w = -w;
        let pre_noise = &trajectory.states[k + 1] - w;
        state.push(eval_bregman(q, &pre_noise, &minus_w)?);
        control.push(eval_bregman(r, &trajectory.inputs[k], &zero_u)?);
        plain.push(q.value(&trajectory.states[k + 1])?);
        floor += eval_bregman(q, &zero_x, &minus_w)?;
    }
    let total: f64 = state.iter().zip(&control).map(|(s, c)| s + c).sum();
    let lyapunov_values = match p {
        Some(p) => trajectory.states.iter().map(|x| p.value(x)).collect::<std::result::Result<_, _>>()?,
        None => Vec::new(),
    };
    Ok(CostReport {
        per_step_state_cost: state,
        per_step_control_cost: control,
        per_step_plain_state_cost: plain,
        average_cost: total / n as f64,
        lyapunov_values,
        noise_floor_estimate: floor / n as f64,
    })
}

/// Residuals of `p(Ax+Bu) − p(x) + r(u) + q(x) = 0` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    /// Raw residual per step.
    pub residuals: Vec<f64>,
    /// Residual divided by `max(1, p(x_k))`.
    pub relative: Vec<f64>,
    pub worst_relative: f64,
    /// Whether every recorded noise is zero.
    pub noiseless: bool,
    /// First step with `x_k ≠ 0` and `p(x_{k+1}) ≥ p(x_k)` on a noiseless run.
    pub first_non_decrease: Option<usize>,
}

impl LyapunovReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst_relative <= tol && self.first_non_decrease.is_none()
    }
}

pub fn lyapunov_monitor(system: &LinearSystem, trajectory: &Trajectory, costs: &CostTriple) -> Result<LyapunovReport> {
    trajectory.check_shape()?;
    let mut residuals = Vec::with_capacity(trajectory.horizon());
    let mut relative = Vec::with_capacity(trajectory.horizon());
    let noiseless = trajectory.noises.iter().all(|w| w.iter().all(|v| *v == 0.0));
    let mut first_non_decrease = None;
    for k in 0..trajectory.horizon() {
        let x = &trajectory.states[k];
        let u = &trajectory.inputs[k];
        let res = lyapunov_residual(system, costs, x, u)?;
        let px = costs.p.value(x)?;
        residuals.push(res);
        relative.push(relative_residual(res + px, px));
        if noiseless && first_non_decrease.is_none() && x.iter().any(|v| *v != 0.0) && px > 0.0 {
            let next = costs.p.value(&trajectory.states[k + 1])?;
            if next >= px {
                first_non_decrease = Some(k);
            }
        }
    }
    let worst_relative = relative.iter().copied().fold(0.0, f64::max);
    Ok(LyapunovReport { residuals, relative, worst_relative, noiseless, first_non_decrease })
}
