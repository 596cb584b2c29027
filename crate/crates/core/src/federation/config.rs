use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::DEFAULT_LEAKY_SLOPE;
use crate::models::HyperConfig;

/// Direction of the softmax in gradient alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// `softmax(γ)`: gradients closer to the mean get more weight.
    Plain,
    /// `softmax(-γ)`: gradients closer to the mean get less weight.
    Negated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    Learned,
    /// Embeddings are re-drawn from `N(0, 1)` after every server update.
    RandomizedEachRound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServerOptimizer {
    Sgd,
    Adam,
}

/// What the server back-propagates through the hypernetwork.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSeed {
    /// `φ_start - φ_end`: the negated local displacement, an approximate
    /// loss gradient that points uphill.
    LocalDelta,
    /// `∇_φ L(φ_start)` on the full client shard, no local training.
    ExactGradient,
}

/// Server and client settings of one hFedF run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HFedFConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub server_lr: f64,
    pub server_weight_decay: f64,
    /// Whether server weight decay also shrinks the embeddings.
    pub decay_embeddings: bool,
    pub client_lr: f64,
    pub client_weight_decay: f64,
    pub ema_enabled: bool,
    pub ema_decay: f64,
    pub ema_warmup: usize,
    pub gradalign_enabled: bool,
    pub gradalign_sign: SignMode,
    pub embedding_mode: EmbeddingMode,
    pub server_optimizer: ServerOptimizer,
    pub delta_seed: DeltaSeed,
}

impl Default for HFedFConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            local_epochs: 2,
            batch_size: 64,
            server_lr: 1e-3,
            server_weight_decay: 1e-5,
            decay_embeddings: true,
            client_lr: 1e-3,
            client_weight_decay: 1e-3,
            ema_enabled: true,
            ema_decay: 0.95,
            ema_warmup: 20,
            gradalign_enabled: true,
            gradalign_sign: SignMode::Plain,
            embedding_mode: EmbeddingMode::Learned,
            server_optimizer: ServerOptimizer::Sgd,
            delta_seed: DeltaSeed::LocalDelta,
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, "must be a finite positive number"))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, "must be a finite number >= 0"))
    }
}

impl HFedFConfig {
    /// Checks every invariant. `rounds == 0` is accepted and means
    /// "evaluate at initialization only".
    pub fn validate(&self) -> Result<()> {
        if self.local_epochs == 0 {
            return Err(Error::config("local_epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        positive("server_lr", self.server_lr)?;
        positive("client_lr", self.client_lr)?;
        non_negative("server_weight_decay", self.server_weight_decay)?;
        non_negative("client_weight_decay", self.client_weight_decay)?;
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::config("ema_decay", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Client-side settings of the FedAvg family, also used by Local and
/// Central.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub client_lr: f64,
    pub client_weight_decay: f64,
    /// FedProx proximal coefficient.
    pub prox_mu: f64,
    /// FedProx client weight decay.
    pub prox_weight_decay: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            client_lr: 1e-3,
            client_weight_decay: 1e-4,
            prox_mu: 1e-2,
            prox_weight_decay: 1e-4,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        positive("client_lr", self.client_lr)?;
        non_negative("client_weight_decay", self.client_weight_decay)?;
        non_negative("prox_mu", self.prox_mu)?;
        non_negative("prox_weight_decay", self.prox_weight_decay)
    }
}

/// Hypernetwork architecture; `embed_dim = None` means `floor(1 + N / 4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperSpec {
    pub embed_dim: Option<usize>,
    pub trunk_width: usize,
    pub trunk_depth: usize,
    pub leaky_slope: f64,
}

impl Default for HyperSpec {
    fn default() -> Self {
        Self {
            embed_dim: None,
            trunk_width: 50,
            trunk_depth: 4,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl HyperSpec {
    pub fn resolve(&self, n_clients: usize) -> HyperConfig {
        HyperConfig {
            embed_dim: self.embed_dim.unwrap_or(1 + n_clients / 4),
            trunk_width: self.trunk_width,
            trunk_depth: self.trunk_depth,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == Some(0) {
            return Err(Error::config("embed_dim", "must be >= 1"));
        }
        if self.trunk_width == 0 || self.trunk_depth == 0 {
            return Err(Error::config(
                "trunk_width",
                "trunk width and depth must be >= 1",
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::config("leaky_slope", "must lie in (0, 1)"));
        }
        Ok(())
    }
}
