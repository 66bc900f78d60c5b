//! Discrete-time linear systems `x⁺ = Ax + Bu + w` and their noise models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("noise covariance must be symmetric positive semidefinite")]
    Covariance,
}

/// Marginal law of each whitened noise coordinate (zero mean, unit variance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
    /// Deterministic system.
    Zero,
}

/// i.i.d. zero-mean noise `w = W^{1/2} e` with `e` drawn coordinatewise
/// from a [`NoiseFamily`].
///
/// Sampling is counter-based: draw `k` for seed `s` comes from the ChaCha20
/// stream `k` keyed by `s`, so trajectories are reproducible regardless of
/// how many draws other consumers make.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    family: NoiseFamily,
    covariance: Matrix,
    sqrt: Matrix,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, covariance: Matrix) -> Result<Self, SystemError> {
        if !covariance.is_square()
            || !linalg::is_symmetric(&covariance, 1e-12)
            || (covariance.nrows() > 0 && linalg::min_eigenvalue(&covariance) < -1e-12)
        {
            return Err(SystemError::Covariance);
        }
        let sqrt = linalg::psd_sqrt(&covariance);
        Ok(Self { family, covariance, sqrt })
    }

    pub fn zero(dim: usize) -> Self {
        let z = Matrix::zeros(dim, dim);
        Self { family: NoiseFamily::Zero, covariance: z.clone(), sqrt: z }
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn is_zero(&self) -> bool {
        self.family == NoiseFamily::Zero || self.covariance.amax() == 0.0
    }

    /// The `index`-th draw for `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Vector {
        let n = self.dim();
        if self.is_zero() {
            return Vector::zeros(n);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let e = Vector::from_iterator(n, (0..n).map(|_| self.whitened(&mut rng)));
        &self.sqrt * e
    }

    fn whitened(&self, rng: &mut ChaCha20Rng) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => rng.sample(StandardNormal),
            NoiseFamily::Uniform => 3f64.sqrt() * rng.random_range(-1.0..=1.0),
            NoiseFamily::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseFamily::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub noise: NoiseModel,
}

impl LinearSystem {
    /// `A` need not be invertible here; controller synthesis checks that
    /// separately.
    pub fn new(a: Matrix, b: Matrix, noise: NoiseModel) -> Result<Self, SystemError> {
        if !a.is_square() {
            return Err(SystemError::Dimension(format!("A is {}×{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(SystemError::Dimension(format!("B is {}×{} for n = {}", b.nrows(), b.ncols(), a.nrows())));
        }
        if noise.dim() != a.nrows() {
            return Err(SystemError::Dimension(format!("noise has dimension {} for n = {}", noise.dim(), a.nrows())));
        }
        Ok(Self { a, b, noise })
    }

    pub fn deterministic(a: Matrix, b: Matrix) -> Result<Self, SystemError> {
        let n = a.nrows();
        Self::new(a, b, NoiseModel::zero(n))
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &Vector, u: &Vector, w: &Vector) -> Vector {
        &self.a * x + &self.b * u + w
    }

    pub fn is_stable(&self) -> bool {
        linalg::spectral_radius(&self.a) < 1.0
    }

    pub fn a_inverse(&self) -> Option<Matrix> {
        let inv = self.a.clone().try_inverse()?;
        inv.iter().all(|v| v.is_finite()).then_some(inv)
    }
}
