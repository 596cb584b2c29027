//! Hypernetwork-based federated fusion for federated domain generalization.
//!
//! This crate holds the allocation-only algorithmic core: dense numerics,
//! the client MLP and the hypernetwork with hand-written reverse passes,
//! synthetic multi-domain data with the domain splitter, the server/client
//! round protocol with gradient alignment and EMA, baselines, and metrics.
//! Everything here is deterministic given its seeds. File formats, the CLI
//! and parallel orchestration live in the `hfedf` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod federation;
pub mod math;
pub mod metrics;
pub mod models;

pub use error::{Error, Result};
