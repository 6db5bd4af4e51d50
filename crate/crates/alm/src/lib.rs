//! Simulation and numerics for mean-field interacting Hawkes processes whose
//! intensity depends on an age variable and a leaky memory vector.
//!
//! * [`model`]: parametric ingredients, presets and assumption checks.
//! * [`particle_sim`]: exact thinning simulation of the finite-N network.
//! * [`limit_sde`]: Picard iteration for the deterministic limit signal.
//! * [`pde_solver`]: characteristic solver for the limit density.
//! * [`path_integral`]: jump-time representation of the limit density.
//! * [`metrics`]: Wasserstein distances and convergence studies.
//! * [`cli`]: config-driven runs with deterministic artifacts.

pub mod error;
pub mod cli;
pub mod limit_sde;
pub mod metrics;
pub mod model;
pub mod par;
pub mod particle_sim;
pub mod path_integral;
pub mod pde_solver;
pub mod quad;
pub mod rng;
pub mod xpath;

pub use error::{AlmError, Result};
