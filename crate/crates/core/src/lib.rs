//! Simulation library for a CubeSat quantum-communication downlink:
//! orbit and decay, ground-station geometry, optical link budget, two-stage
//! fine pointing, photon-level QKD and mission budgeting.

pub mod constants;
pub mod error;
pub mod geometry;
pub mod link;
pub mod mission;
pub mod orbit;
pub mod pointing;
pub mod quantum;
pub mod scenario;
pub mod time;

pub use error::{ModelError, Result};
