//! Exact diagonalization of the half-filled Kondo lattice model with a
//! linear electron-phonon coupling, together with finite-dimensional checks
//! of its ground-state properties: uniqueness, total spin, correlation signs,
//! and positivity of the associated semigroups with respect to Hilbert cones.

pub mod cli;
pub mod cones;
pub mod fock;
pub mod hamiltonians;
pub mod linalg;
pub mod model;
pub mod spectra;
pub mod transforms;
pub mod verify;
