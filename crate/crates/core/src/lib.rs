//! Learning exactly time-reversible (and optionally symplectic) discrete-time
//! evolution maps from sampled input/output pairs.
//!
//! The crate provides:
//! - ground-truth generators for two Hamiltonian benchmarks (the Hénon-Heiles
//!   Poincaré return map and the stroboscopic map of a periodically driven
//!   pendulum),
//! - invertible trainable layers (Real NVP couplings, polynomial Hénon maps,
//!   SympNet linear/activation modules) with exact analytic inverses, exact
//!   Jacobians and hand-written reverse-mode gradients,
//! - model assemblies in which reversibility (T = R g^-1 R g) and
//!   symplecticity hold by construction, at any parameter values,
//! - full-batch Adam training with deterministic seeding, and
//! - evaluation utilities: map iteration, Poincaré plot data, prediction-error
//!   curves and model comparison reports.

pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod layers;
pub mod linalg;
pub mod plot;
pub mod region;
pub mod reversible;
pub mod training;

pub use error::{Error, Result};
