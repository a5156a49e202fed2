//! Simulation toolkit for a pair of weakly coupled lossy chains with
//! imaginary next-to-nearest-neighbour couplings: Hamiltonians, complex
//! spectra and winding numbers, scale-free localization diagnostics,
//! dissipative time evolution and local decay (edge burst) analysis.
//!
//! Site indices in every public interface are 1-based.

pub mod cli;
pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod output;
pub mod spectral;

pub use faer::c64;
pub use model::{build_obc_hamiltonian, LatticeParams, StateVector};
