//! Closed-loop simulator for automatic power-factor correction of a
//! three-phase induction-motor load by a PLC switching a capacitor bank.
//!
//! The pieces, bottom up:
//!
//! - [`phasor`]: power-triangle arithmetic.
//! - [`motor`]: table-driven motor surrogate (current → pf, speed).
//! - [`bank`]: capacitor units, binary sizing, zero-crossing gated switching.
//! - [`signal`]: comparator/XOR phase detector, peak detector, ADC and digital inputs.
//! - [`controller`]: the scan cycle with lookup and greedy selection, debounce and fault latching.
//! - [`scenario`], [`sim`], [`report`]: scenario files, time stepping and CSV output.

pub mod bank;
pub mod bits;
pub mod controller;
pub mod error;
pub mod motor;
pub mod par;
pub mod phasor;
pub mod report;
pub mod scenario;
pub mod select;
pub mod signal;
pub mod sim;

pub use bank::{BankState, CapacitorUnit, Connection, Health};
pub use bits::SwitchBits;
pub use controller::{ControllerConfig, ControllerState, Mode, ScanImage};
pub use error::{Error, Result};
pub use motor::LoadTable;
pub use par::Execution;
pub use phasor::{OperatingPoint, SupplySpec};
pub use scenario::ScenarioConfig;
pub use sim::{run_scenario, sweep, SimRecord, Trace};
