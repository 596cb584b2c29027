//! JSON checkpoints of the hFedF server state.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a resumed run continues bit for bit.

use std::path::Path;

use hfedf_core::federation::FederationState;

use crate::error::{Error, Result};

pub fn save_state(path: &Path, state: &FederationState) -> Result<()> {
    let text = serde_json::to_string(state)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_state(path: &Path) -> Result<FederationState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let state: FederationState = serde_json::from_str(&text)?;
    state.config.validate()?;
    Ok(state)
}
