//! Quasi-static time-series (QSTS) simulation of radial, unbalanced
//! distribution feeders with smart-inverter voltage control.
//!
//! The crate is organised bottom-up:
//!
//! * [`feeder`] validates a feeder description into a radial [`Network`].
//! * [`power_flow`] solves one operating point with a backward/forward sweep.
//! * [`inverter`] holds the smart-inverter control functions.
//! * [`controllers`] decides regulator taps and capacitor switching.
//! * [`qsts`] runs the per-minute control loop over a day.
//! * [`metrics`] turns switching logs into cost factors and impact indices.
//! * [`harmonics`] runs a current-injection frequency scan.
//! * [`io`] reads and writes feeders, scenarios, profiles and result bundles.

pub mod controllers;
pub mod error;
pub mod feeder;
pub mod fixtures;
pub mod harmonics;
pub mod inverter;
pub mod io;
pub mod metrics;
pub mod phase;
pub mod power_flow;
pub mod profiles;
pub mod qsts;

pub use error::Error;
pub use feeder::{build_network, Network};
pub use phase::{Phase, PhaseSet};
pub use power_flow::{solve, total_losses, InjectionSet, Solution};
