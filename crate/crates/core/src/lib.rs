//! Partitioned grand-canonical thermodynamics of quasi-statically driven,
//! non-interacting fermion systems.
//!
//! The single-particle Hamiltonian `h(s)` of a small tight-binding model is
//! driven along a piecewise-linear path. In the quasi-static limit the
//! instantaneous eigenstates stay Fermi-Dirac occupied, and every quantity
//! here (energy, entropy, particle number, grand potential, work) is split
//! between subsystems by the probability weights `⟨ν|π_γ|ν⟩`.
//!
//! Module map:
//! - [`model`]: Hamiltonian family, protocols, partitions, reservoir
//! - [`spectral`]: eigensolver, adiabatic frames, probability weights and rates
//! - [`thermo`]: Fermi-Dirac kernels and global quantities
//! - [`partition_thermo`]: subsystem quantities, First Law, LDOS
//! - [`work`]: partitioned power, nonlocal work, sum rule, mechanical advantage
//! - [`oracle`]: Fock-space exact diagonalisation and two-level closed forms
//! - [`runner`], [`config`], [`output`]: protocol integration, experiments, CSV

pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod output;
pub mod partition_thermo;
pub mod quadrature;
pub mod runner;
pub mod spectral;
pub mod thermo;
pub mod work;

pub use error::{Error, Result};
