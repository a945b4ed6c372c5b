//! Simulation and verification of magnetic flows on twisted cotangent
//! bundles of tori, the Heisenberg group, PSL(2,R), Sol and a
//! four-dimensional nilpotent group.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod lie;
pub mod linalg;
pub mod mane;
pub mod par;
pub mod rabinowitz;
pub mod stability;
pub mod systems;

pub use error::{Error, Result};
pub use lie::Family;
pub use systems::{hamiltonian, vector_field, MagneticSystem, OneFormId, PhaseState};
