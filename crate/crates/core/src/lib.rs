//! Simulation of a frequency-bin entangled photon-pair experiment and
//! certification of its entanglement dimensionality from a small number of
//! measurement settings.

pub mod apparatus;
pub mod belltest;
pub mod certify;
#[cfg(feature = "cli")]
pub mod cli;
pub mod dataset;
pub mod error;
pub mod protocol;
pub mod simulate;
pub mod state;

pub use error::{Error, Result};
