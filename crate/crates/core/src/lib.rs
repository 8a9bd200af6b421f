//! Simulation and analysis toolkit for reading out a flux qubit through a
//! quantum flux parametron (QFP) coupled to a flux-tunable resonator.
//!
//! The crate is organised by subsystem:
//!
//! * [`device`] – circuit constants, configuration loading and flux-bias
//!   schedules.
//! * [`qfp`] – closed-form coupler/amplifier relations, s-curves and
//!   separation fidelity.
//! * [`resonator`] – RF-SQUID loaded quarter-wave resonator, S21 lineshape
//!   and fitting.
//! * [`anneal`] – quasi-static anneal-and-latch simulator.
//! * [`hamiltonian`] – normal-mode Hamiltonians, eigensolvers, anti-crossing
//!   extraction and the Purcell lifetime model.
//! * [`readout`] – single-shot Monte Carlo, histogram analysis and fidelity.
//!
//! Fluxes are dimensionless in units of the flux quantum everywhere; all
//! other quantities are SI unless a name says otherwise (`_ghz`, `_mhz`).

pub mod anneal;
pub mod device;
mod error;
pub mod fit;
pub mod hamiltonian;
pub mod qfp;
pub mod readout;
pub mod resonator;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};

/// Superconducting flux quantum h/2e in webers.
pub const PHI0: f64 = 2.067833848e-15;

/// Reduced flux quantum Φ0/2π in webers.
pub const PHI0_REDUCED: f64 = PHI0 / (2.0 * std::f64::consts::PI);
