//! Simulation and finite-size security analysis of sending-or-not-sending
//! twin-field QKD, together with the phase-tracking tools that turn the same
//! link into a distributed vibration sensor.

pub mod error;
pub mod model;
pub mod optimize;
pub mod security;
pub mod sensing;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    binary_entropy, transmittance, DetectorModel, LinkModel, SecurityParams, Setting,
    SourceParams,
};
