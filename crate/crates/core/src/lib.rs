//! Adversarially robust quantum classification.
//!
//! A classical input `x` is embedded as a density matrix `ρ(x)` and classified
//! by a POVM. An adversary may replace `ρ(x)` by any state `λ` within a
//! Schatten-`p` ball of radius `ε`. This crate provides the worst-case
//! perturbation solvers, the generalization-bound calculators, Monte Carlo
//! estimators of generalization errors and Rademacher complexities, and
//! min-max training of POVMs.

pub mod attack;
pub mod bounds;
pub mod embed;
pub mod error;
pub mod estimate;
pub mod qmat;
pub mod rng;
pub mod stats;
pub mod train;

pub use error::{Constraint, Error, Result};
pub use qmat::{DensityMatrix, HermitianMatrix, NormOrder, Povm, SchattenOrder};
