//! Experiment harness: configuration, training runs, sweeps and their outputs.

pub mod config;
pub mod error;
pub mod output;
pub mod stats;
pub mod train;

pub use config::{Algorithm, RunConfig};
pub use error::{LabError, Result};
pub use train::{train, RunRecord};
