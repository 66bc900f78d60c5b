use super::{Result, SimError};
use crate::convex::Vector;
use crate::synthesis::Controller;
use crate::system::LinearSystem;

/// Generator behind [`crate::NoiseModel::sample`].
pub const RNG_NAME: &str = "chacha20";

/// A closed-loop run: `x_{k+1} = Ax_k + Bu_k + w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub noises: Vec<Vector>,
    pub seed: u64,
    pub rng: String,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    /// Largest `|x_{k+1} − (Ax_k + Bu_k + w_k)|` entry.
    pub fn reconstruction_error(&self, system: &LinearSystem) -> Result<f64> {
        self.check_shape()?;
        let mut worst = 0.0f64;
        for k in 0..self.horizon() {
            let next = system.step(&self.states[k], &self.inputs[k], &self.noises[k]);
            worst = worst.max((&next - &self.states[k + 1]).amax());
        }
        Ok(worst)
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let n = self.inputs.len();
        if self.states.len() != n + 1 {
            return Err(SimError::Malformed(format!("{} states for {} inputs", self.states.len(), n)));
        }
        if self.noises.len() != n {
            return Err(SimError::Malformed(format!("{} noise records for {} inputs", self.noises.len(), n)));
        }
        Ok(())
    }
}

/// Runs `horizon` steps of `u_k = controller(x_k)` from `x0`, drawing `w_k`
/// from the system's noise model on stream `k` of `seed`.
pub fn rollout(system: &LinearSystem, controller: &Controller, x0: &Vector, horizon: usize, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(SimError::Horizon);
    }
    if x0.len() != system.state_dim() {
        return Err(SimError::Dimension(format!("x0 has length {}, system has {} states", x0.len(), system.state_dim())));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    states.push(x0.clone());
    for k in 0..horizon {
        let x = &states[k];
        let u = controller.feedback(x).map_err(|source| SimError::Controller { step: k, source })?;
        let w = system.noise.sample(seed, k as u64);
        let next = system.step(x, &u, &w);
        inputs.push(u);
        noises.push(w);
        states.push(next);
    }
    Ok(Trajectory { states, inputs, noises, seed, rng: RNG_NAME.into() })
}
