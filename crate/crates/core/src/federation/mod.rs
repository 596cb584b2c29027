//! Server/client protocol: local training, gradient alignment, EMA
//! smoothing of the hypernetwork, the hFedF round, the FedAvg / FedProx /
//! Local / Central baselines, and the per-cell experiment driver.

mod align;
mod baselines;
mod client;
mod config;
mod ema;
mod experiment;
mod hfedf;

pub use align::{grad_align, uniform_alignment, Alignment};
pub use baselines::{central_round, fedavg_aggregate, fedavg_round, fedprox_round, local_round};
pub use client::{client_update, LocalResult, LocalTraining};
pub use config::{
    BaselineConfig, DeltaSeed, EmbeddingMode, HFedFConfig, HyperSpec, ServerOptimizer, SignMode,
};
pub use ema::{ema_step, ema_update};
pub use experiment::{
    grid, run_cell, run_experiment, Algorithm, CellConfidence, CellData, CellKey, CellOutcome,
    ExperimentPlan, RunOptions, StreamLabels,
};
pub use hfedf::{AdamState, FederationState, RoundTrace};
