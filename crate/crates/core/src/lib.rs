//! Discrete-event simulator for TSN smart-factory networks.

pub mod compression;
pub mod engine;
pub mod error;
pub mod fabric;
pub mod frame;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod shaping;
pub mod sim;
pub mod sweep;
pub mod time;
pub mod traffic;

pub use error::{Result, SimError};
pub use time::SimTime;
