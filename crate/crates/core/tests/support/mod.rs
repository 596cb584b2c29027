//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod fd;
pub mod reference;
pub mod split_check;
