//! Benchmark Hamiltonian systems, their flows, and ground-truth section maps.

mod dataset;
mod integrate;
mod poincare;
mod systems;

pub use dataset::{generate_dataset, Dataset, DatasetMeta};
pub use integrate::{integrate, rk4_step, IntegratorConfig, Orbit};
pub use poincare::{
    hh_poincare_map, pendulum_stroboscopic_map, reconstruct_px, HenonHeilesMap, PendulumMap,
    ReturnMap,
};
pub use systems::{
    hh_energy, hh_vector_field, pendulum_energy, pendulum_vector_field, DrivenPendulumSystem,
    HenonHeilesSystem,
};
