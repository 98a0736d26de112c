//! Semi-device-independent randomness certification for prepare-and-measure
//! setups with three coherent-state inputs and a three-outcome measurement.

pub mod config;
pub mod error;
pub mod finitesize;
pub mod guessing;
pub mod input;
pub mod linalg;
pub mod output;
pub mod photonics;
pub mod pipeline;
pub mod qstates;
pub mod radau;
pub mod sdp;
pub mod seesaw;
pub mod simulator;
pub mod stats;
pub mod tolerance;

pub use error::{Error, Result};
