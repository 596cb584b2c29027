//! File formats, configuration, parallel grid execution and the command
//! line front end for the `hfedf-core` simulator.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod output;
pub mod runner;

pub use config::{parse_config, ExperimentConfig};
pub use error::{Error, Result};
pub use manifest::RunManifest;
pub use runner::{run_grid, run_to_dir, RunReport};
