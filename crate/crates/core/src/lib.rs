//! Three-species tumor / effector / IL-2 reaction–diffusion model with
//! cross-diffusion of IL-2 along the tumor gradient.
//!
//! The crate covers the homogeneous analysis (equilibria, Routh–Hurwitz
//! existence regions, eigenvalue classification, Hopf points), the Turing
//! dispersion relation of `J - D k²`, an RK4 integrator for the
//! diffusion-free system, an explicit finite-difference solver on the unit
//! square or interval, and pattern diagnostics.
//!
//! Data-parallel kernels take an [`Exec`] policy; building without the
//! default `parallel` feature turns every policy into the sequential path.

// Negated comparisons are used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod equilibria;
pub mod error;
pub mod exec;
pub mod io;
pub mod kinetics;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod pde;
pub mod stability;

pub use equilibria::{Equilibrium, EquilibriumKind, Stability};
pub use error::{Error, Result};
pub use exec::Exec;
pub use kinetics::{ModelParams, Scenario, State};
