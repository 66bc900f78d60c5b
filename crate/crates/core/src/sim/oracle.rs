use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::{Result, SimError};
use crate::convex::{golden_max, ConvexFunction};
use crate::system::{LinearSystem, NoiseFamily};

/// Probabilists' Gauss–Hermite rule: nodes and weights with
/// `Σ wᵢ f(zᵢ) ≈ E f(Z)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize against eigen-solver round-off.
    for k in 0..n / 2 {
        let (lo, hi) = (pairs[k], pairs[n - 1 - k]);
        let z = 0.5 * (hi.0 - lo.0);
        let w = 0.5 * (lo.1 + hi.1);
        pairs[k] = (-z, w);
        pairs[n - 1 - k] = (z, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(z, w)| (z, w / total)).unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// State grid is `states` uniform points on `[−x_max, x_max]`.
    pub x_max: f64,
    pub states: usize,
    /// Coarse input grid is `inputs` uniform points on `[−u_max, u_max]`.
    pub u_max: f64,
    pub inputs: usize,
    /// Golden-section refinement of the coarse minimizer.
    pub refine: bool,
    pub quadrature_nodes: usize,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { x_max: 5.0, states: 2001, u_max: 10.0, inputs: 401, refine: true, quadrature_nodes: 21, max_sweeps: 2000, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub states: Vec<f64>,
    /// Relative value, zero at the origin.
    pub values: Vec<f64>,
    pub policy: Vec<f64>,
    /// Average cost per step at the last sweep.
    pub gain: f64,
    pub sweeps: usize,
    pub delta: f64,
}

impl OracleSolution {
    pub fn step(&self) -> f64 {
        self.states[1] - self.states[0]
    }
}

struct Table<'a> {
    lo: f64,
    h: f64,
    values: &'a [f64],
    /// Quadratic extrapolation coefficients `(v, slope, curvature)` at each end.
    left: (f64, f64, f64),
    right: (f64, f64, f64),
}

impl<'a> Table<'a> {
    fn new(lo: f64, h: f64, values: &'a [f64]) -> Self {
        let n = values.len();
        let k = (n / 8).max(1);
        let fit = |i0: usize, i1: usize, i2: usize| {
            // Quadratic through three grid points, expressed about i0.
            let (x0, x1, x2) = (i0 as f64 * h, i1 as f64 * h, i2 as f64 * h);
            let (v0, v1, v2) = (values[i0], values[i1], values[i2]);
            let d01 = (v1 - v0) / (x1 - x0);
            let d12 = (v2 - v1) / (x2 - x1);
            let c = (d12 - d01) / (x2 - x0);
            let slope = d01 - c * (x1 - x0);
            (v0, slope, c.max(0.0))
        };
        Self { lo, h, values, left: fit(0, k, 2 * k), right: fit(n - 1, n - 1 - k, n - 1 - 2 * k) }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = (x - self.lo) / self.h;
        if s <= 0.0 {
            let d = s * self.h;
            let (v, g, c) = self.left;
            return v + g * d + c * d * d;
        }
        if s >= (n - 1) as f64 {
            let d = (s - (n - 1) as f64) * self.h;
            let (v, g, c) = self.right;
            return v + g * d + c * d * d;
        }
        let i = (s as usize).min(n - 2);
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// Relative value iteration for the average Bregman cost of a scalar
/// system: `V(x) ← min_u r(u) + E[D_q(ax+bu, −w) + V(ax+bu+w)]`, then
/// `V ← V − V(0)`. Expectations use Gauss–Hermite quadrature for Gaussian
/// noise and a single node for degenerate noise.
pub fn value_iteration_oracle(
    system: &LinearSystem,
    q: &dyn ConvexFunction,
    r: &dyn ConvexFunction,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    if system.state_dim() != 1 || system.input_dim() != 1 || q.dim() != 1 || r.dim() != 1 {
        return Err(SimError::Unsupported("the value-iteration oracle handles scalar systems only".into()));
    }
    if opts.states < 3 || opts.states % 2 == 0 || opts.inputs < 3 || opts.inputs % 2 == 0 {
        return Err(SimError::Unsupported("state and input grids need an odd number (≥ 3) of points".into()));
    }
    let (nodes, weights) = if system.noise.is_zero() {
        (vec![0.0], vec![1.0])
    } else if system.noise.family() == NoiseFamily::Gaussian {
        let sigma = system.noise.covariance()[(0, 0)].sqrt();
        let (z, w) = gauss_hermite(opts.quadrature_nodes);
        (z.into_iter().map(|z| sigma * z).collect(), w)
    } else {
        return Err(SimError::Unsupported(format!("quadrature for {:?} noise", system.noise.family())));
    };
    let a = system.a[(0, 0)];
    let b = system.b[(0, 0)];

    // D_q(y, −w) = q(y) − q(−w) − q'(−w)(y + w); precompute the w terms.
    let mut shift = 0.0;
    let mut slope = 0.0;
    for (w, wt) in nodes.iter().zip(&weights) {
        let g = q.gradient_at(-w)?;
        shift += wt * (q.value_at(-w)? + g * w);
        slope += wt * g;
    }

    let n = opts.states;
    let h = 2.0 * opts.x_max / (n - 1) as f64;
    let states: Vec<f64> = (0..n).map(|i| if i == n / 2 { 0.0 } else { -opts.x_max + i as f64 * h }).collect();
    let du = 2.0 * opts.u_max / (opts.inputs - 1) as f64;
    let inputs: Vec<f64> = (0..opts.inputs).map(|j| if j == opts.inputs / 2 { 0.0 } else { -opts.u_max + j as f64 * du }).collect();
    let r_values: Vec<f64> = inputs.iter().map(|u| r.value_at(*u).unwrap_or(f64::INFINITY)).collect();

    let mut values = vec![0.0; n];
    let mut policy = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let table = Table::new(-opts.x_max, h, &values);
        let continuation = |y: f64| -> f64 {
            let qy = q.value_at(y).unwrap_or(f64::INFINITY);
            let mut ev = 0.0;
            for (w, wt) in nodes.iter().zip(&weights) {
                ev += wt * table.eval(y + w);
            }
            qy - shift - slope * y + ev
        };
        let backed: Vec<(f64, f64)> = states
            .par_iter()
            .map(|&x| {
                let cost = |u: f64, ru: f64| ru + continuation(a * x + b * u);
                let (mut best_j, mut best_u, mut best_k) = (f64::INFINITY, 0.0, inputs.len() / 2);
                for (k, (&u, &ru)) in inputs.iter().zip(&r_values).enumerate() {
                    if !ru.is_finite() {
                        continue;
                    }
                    let j = cost(u, ru);
                    if j < best_j {
                        (best_j, best_u, best_k) = (j, u, k);
                    }
                }
                if opts.refine {
                    let lo = inputs[best_k.saturating_sub(1)];
                    let hi = inputs[(best_k + 1).min(inputs.len() - 1)];
                    let neg = |u: f64| Ok(-cost(u, r.value_at(u).unwrap_or(f64::INFINITY)));
                    if let Ok((u, v)) = golden_max(neg, lo, hi) {
                        if -v < best_j {
                            (best_j, best_u) = (-v, u);
                        }
                    }
                }
                (best_j, best_u)
            })
            .collect();
        let gain = backed[n / 2].0;
        delta = 0.0;
        for (i, (j, u)) in backed.into_iter().enumerate() {
            let v = j - gain;
            delta = delta.max((v - values[i]).abs());
            values[i] = v;
            policy[i] = u;
        }
        if delta <= opts.tol {
            return Ok(OracleSolution { states, values, policy, gain, sweeps: sweep, delta });
        }
    }
    Err(SimError::NotConverged { sweeps: opts.max_sweeps, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_moments() {
        let (z, w) = gauss_hermite(21);
        let moment = |p: i32| z.iter().zip(&w).map(|(z, w)| w * z.powi(p)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-13);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-11);
        assert!((moment(6) - 15.0).abs() < 1e-10);
        assert_eq!(z[10], 0.0);
    }
}
