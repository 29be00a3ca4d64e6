//! Response functions and gauge-invariance checks.

pub mod gauge;
pub mod response;
pub mod spectrum;

pub use gauge::{gauge_invariance_check, velocity_length_check, EnergyShift, GaugeCheckReport, GaugeTolerances};
pub use response::{harmonic_spectrum, linear_susceptibility, HarmonicOptions, KickGauge, ResponseOptions, Susceptibility};
pub use spectrum::{ResponseSpectrum, Window};
