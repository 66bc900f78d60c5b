//! Sample sets on which the universally quantified conditions are checked.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

/// Grid parameters recorded in every certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Points of the symmetric log-spaced scalar grid (odd, includes 0).
    pub points: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Directions × radii for vector grids.
    pub directions: usize,
    pub radii: usize,
    /// The numeric convexity grid spans `[−10·scale, 10·scale]`.
    pub convexity_scale: f64,
    pub convexity_points: usize,
    /// Half-width of the state samples used by the certificate checks.
    pub verify_radius: f64,
    pub verify_samples: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 2001,
            r_min: 1e-3,
            r_max: 1e2,
            directions: 500,
            radii: 20,
            convexity_scale: 1.0,
            convexity_points: 2001,
            verify_radius: 10.0,
            verify_samples: 200,
            seed: 0x5eed,
        }
    }
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..count).map(|i| (l + (h - l) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    // Coordinate axes first so that diagonal structure is always probed.
    for i in 0..dim.min(count) {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        out.push(e);
    }
    while out.len() < count {
        let v = Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
        let n = v.norm();
        if n > 1e-8 {
            out.push(v / n);
        }
    }
    out
}

impl GridSpec {
    /// The feasibility grid in `ℝ^dim`.
    pub fn samples(&self, dim: usize) -> Vec<Vector> {
        if dim == 1 {
            let half = self.points / 2;
            let mags = log_space(self.r_min, self.r_max, half.max(1));
            let mut out: Vec<Vector> = mags.iter().rev().map(|r| crate::linalg::scalar(-r)).collect();
            out.push(crate::linalg::scalar(0.0));
            out.extend(mags.iter().map(|r| crate::linalg::scalar(*r)));
            return out;
        }
        let radii = log_space(self.r_min, self.r_max, self.radii);
        let mut out = vec![Vector::zeros(dim)];
        for d in random_directions(dim, self.directions, self.seed) {
            for r in &radii {
                out.push(&d * *r);
            }
        }
        out
    }

    /// Uniform scalar grid for second-difference convexity tests.
    pub fn convexity_grid(&self) -> Vec<f64> {
        let half = 10.0 * self.convexity_scale;
        let n = self.convexity_points.max(3);
        (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    /// State samples for the certificate checks: symmetric and evenly spaced
    /// for scalars, random directions with spread radii otherwise.
    pub fn verification_states(&self, dim: usize) -> Vec<Vector> {
        let n = self.verify_samples.max(1);
        let r = self.verify_radius;
        if dim == 1 {
            return (0..n)
                .map(|i| crate::linalg::scalar(-r + 2.0 * r * (i as f64 + 0.5) / n as f64))
                .collect();
        }
        random_directions(dim, n, self.seed ^ 0x9e37_79b9)
            .into_iter()
            .enumerate()
            .map(|(i, d)| d * (r * (i as f64 + 1.0) / n as f64))
            .collect()
    }
}
