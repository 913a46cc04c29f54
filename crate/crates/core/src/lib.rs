//! Thermodynamics of a qubit coupled to a bosonic bath under frequent
//! non-selective QND measurements.
//!
//! Units: ħ = 1 and the qubit gap ω_a = 1. Frequencies, energies and rates are
//! in units of ω_a, times in units of 1/ω_a, and temperature enters through the
//! dimensionless α = βħω_a.

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod exact;
pub mod export;
pub mod master_equation;
pub mod ode;
pub mod quad;
pub mod rates;
pub mod scheduler;
pub mod spectrum;
pub mod thermo;

pub use error::{Error, Result};
pub use master_equation::{MeasurementEvent, MeasurementSchedule, QubitPopulations, SimulationTrace};
pub use spectrum::{BathSpectrumSpec, DiscreteBathModel, InverseTemperature};
