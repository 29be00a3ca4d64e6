//! Grid-based time-dependent Schrödinger dynamics for one or two charged
//! particles in externally prescribed electromagnetic potentials.
//!
//! The matter Hamiltonian is built with minimal coupling in an arbitrary gauge
//! (`HamiltonianSpec` with [`GaugeForm::General`]), in the Coulomb gauge with a
//! uniform transverse vector potential and a homogeneous longitudinal field
//! ([`GaugeForm::Coulomb`]), or in the length form ([`GaugeForm::Length`]).
//! The [`analysis`] module checks numerically that gauge-invariant observables
//! and the linear/nonlinear dipole response do not depend on that choice.
//!
//! Hartree atomic units are used throughout.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod observables;
pub mod output;
pub mod scenario;

pub use error::{Error, Result};
pub use fields::{Field, FieldConfig, GaugeFunction};
pub use grid::{Grid, ParticleSpec, Units, WaveFunction};
pub use hamiltonian::{GaugeForm, HamiltonianSpec, PotentialGrid};

pub use num_complex::Complex64 as C64;
