//! Simulation of heralded remote entanglement distribution between two
//! unconnected nodes of a four-photon, three-node linear-optical network.
//!
//! Entanglement between nodes R and L is activated by the spatial overlap of
//! independent photons at a shared central node M, followed by local photon
//! counting and product-state polarization measurements at M.
//!
//! Modules, bottom-up:
//! - [`fock`]: sparse bosonic Fock states over labeled modes
//! - [`optics`]: linear-optical elements compiled into mode unitaries
//! - [`slocc`]: source preparation, node-count post-selection, Bell structure
//! - [`measurement`]: the node-M measurement chain and heralding
//! - [`entanglement`]: two-qubit density matrices, fidelity and concurrence
//! - [`tomography`]: shot-noise simulation, reconstruction, HOM curves
//! - [`experiments`]: scenario files and end-to-end runs

pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod measurement;
pub mod optics;
pub mod slocc;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{FockState, ModeLabel, OccupationPattern, Polarization, Site};
