//! The client classifier and the hypernetwork that generates its weights.
//!
//! Both models keep their parameters in a flat [`ParamVector`] so the
//! hypernetwork heads, the client optimizer and server-side aggregation all
//! trade in the same currency. Reverse passes are written out by hand; the
//! hypernetwork exposes a vector-Jacobian product rather than a Jacobian.

mod client;
mod hypernet;
mod params;

pub use client::{ClientModel, ForwardCache};
pub use hypernet::{EmaShadow, GradPair, HyperConfig, Hypernetwork};
pub use params::{LayerShape, Layout, ParamVector};
