//! Optimal stochastic control of discrete-time linear systems under
//! Bregman-divergence costs.
//!
//! The crate is organised bottom-up:
//!
//! * [`convex`]: convex cost functions, Bregman divergences, Fenchel duals
//!   and gradient inversion.
//! * [`system`] and [`lqr`]: linear plants, noise models and the classical
//!   DARE/LQR baseline.
//! * [`synthesis`]: feasibility checks and search for the value-function
//!   matrix `M`, derivation of the companion cost and the nonlinear
//!   feedback law `u = ∇r*(−2BᵀA⁻ᵀMx)`.
//! * [`families`]: closed-form scalar controller families (bang-bang,
//!   exponential, elastic-net).
//! * [`sim`]: seeded rollouts, cost accounting, Lyapunov monitoring and a
//!   brute-force value-iteration oracle.
//! * [`cli`]: config-driven commands behind the `bregctl` binary.

pub mod cli;
pub mod convex;
pub mod families;
pub mod linalg;
pub mod lqr;
pub mod sim;
pub mod synthesis;
pub mod system;
pub mod tolerances;

pub use convex::{ConvexError, ConvexFunction, DualFunction, FunctionKind, Matrix, Vector};
pub use system::{LinearSystem, NoiseFamily, NoiseModel};
