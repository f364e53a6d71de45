//! Compact-model toolkit for a two-terminal ferroelectric HfZrO4/WOx memristor.
//!
//! The crate is organised bottom-up:
//!
//! * [`conduction`]: static I(V, T, state) models (Ohmic, Poole-Frenkel,
//!   Simmons tunneling) and calibration of the default device.
//! * [`device_state`]: the device as a state machine driven by write pulses,
//!   DC sweeps, retention and endurance.
//! * [`extraction`]: regressions that recover model parameters from sweeps
//!   and pulse traces.
//! * [`crossbar`]: nonlinear nodal solver, V/2 writes, sneak-path margins and
//!   virtual-ground MVM reads.
//! * [`inference`]: differential weight mapping, write-verify programming and
//!   Monte Carlo MVM error statistics.

pub mod conduction;
pub mod crossbar;
pub mod device_state;
pub mod error;
pub mod extraction;
pub mod inference;
pub mod rng;

pub use conduction::{CalibrationTargets, Channels, ConductionParams, Readout, TunnelingParams};
pub use device_state::{DeviceState, PulseScheme, PulseSpec, SchemeKind, UpdateModel};
pub use error::{ModelError, Result};
