use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{ensure_dim, Error, Result};
use crate::math::{axpy, norm, RngStream};
use crate::models::{ClientModel, GradPair, HyperConfig, Hypernetwork, ParamVector};

use super::{
    client_update, ema_step, grad_align, uniform_alignment, Alignment, DeltaSeed, EmbeddingMode,
    HFedFConfig, LocalTraining, ServerOptimizer,
};

/// Adam moments over the concatenation `[θ, ν]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// Returns the step direction for gradient `g` (already including any
    /// L2 term); the caller subtracts `lr * direction`.
    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
        let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
        g.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&gi, (m, v))| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                (*m / c1) / (libm::sqrt(*v / c2) + ADAM_EPS)
            })
            .collect()
    }
}

/// What happened in one server round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    /// Cosine of each client's θ-gradient to the mean θ-gradient.
    pub cos_theta: Vec<f64>,
    pub weights_theta: Vec<f64>,
    pub cos_nu: Vec<f64>,
    pub weights_nu: Vec<f64>,
    pub grad_norm_theta: f64,
    pub grad_norm_nu: f64,
    pub client_loss: Vec<f64>,
}

/// Server-side state of an hFedF run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationState {
    pub hypernet: Hypernetwork,
    pub model: ClientModel,
    pub round: usize,
    pub config: HFedFConfig,
    pub client_rngs: Vec<RngStream>,
    pub server_rng: RngStream,
    pub adam: Option<AdamState>,
}

impl FederationState {
    /// Fresh hypernetwork drawn from `init_rng`; client `i` shuffles with
    /// `client_rngs[i]`.
    pub fn new(
        config: HFedFConfig,
        model: ClientModel,
        hyper: HyperConfig,
        init_rng: &mut RngStream,
        client_rngs: Vec<RngStream>,
        server_rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        let hypernet = Hypernetwork::new(hyper, model.layout(), client_rngs.len(), init_rng);
        Self::from_hypernet(config, model, hypernet, client_rngs, server_rng)
    }

    pub fn from_hypernet(
        config: HFedFConfig,
        model: ClientModel,
        hypernet: Hypernetwork,
        client_rngs: Vec<RngStream>,
        server_rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        ensure_dim("FederationState", hypernet.n_clients(), client_rngs.len())?;
        let adam = match config.server_optimizer {
            ServerOptimizer::Adam => Some(AdamState::new(
                hypernet.theta.len() + hypernet.embeddings.as_slice().len(),
            )),
            ServerOptimizer::Sgd => None,
        };
        Ok(Self {
            hypernet,
            model,
            round: 0,
            config,
            client_rngs,
            server_rng,
            adam,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.hypernet.n_clients()
    }

    fn local_training(&self) -> LocalTraining {
        LocalTraining {
            epochs: self.config.local_epochs,
            lr: self.config.client_lr,
            batch_size: self.config.batch_size,
            weight_decay: self.config.client_weight_decay,
            prox: 0.0,
        }
    }

    /// Parameters the hypernetwork currently generates for every client.
    pub fn client_params(&self) -> Result<Vec<ParamVector>> {
        (0..self.n_clients())
            .map(|i| self.hypernet.forward(i))
            .collect()
    }

    /// Client step for client `i`: generate, train locally, and return the
    /// back-propagated seed with the client's loss.
    fn client_gradient(&mut self, i: usize, shard: &LabeledSet) -> Result<(GradPair, f64)> {
        let start = self.hypernet.forward(i)?;
        let (seed, loss) = match self.config.delta_seed {
            DeltaSeed::LocalDelta => {
                let opts = self.local_training();
                let local = client_update(
                    &self.model,
                    &start,
                    shard,
                    &opts,
                    None,
                    &mut self.client_rngs[i],
                )?;
                let mut seed = start.clone();
                axpy(-1.0, local.params.values(), seed.values_mut());
                (seed, local.loss)
            }
            DeltaSeed::ExactGradient => {
                let (loss, grad) = self.model.backward(&start, &shard.x, &shard.y)?;
                (grad, loss)
            }
        };
        Ok((self.hypernet.vjp(i, &seed)?, loss))
    }

    /// One communication round. Client work runs in client order; the
    /// weighted sums are accumulated in that same fixed order.
    pub fn round(&mut self, shards: &[LabeledSet]) -> Result<RoundTrace> {
        let n = self.n_clients();
        ensure_dim("hfedf_round", n, shards.len())?;
        let embed_dim = self.hypernet.embeddings.cols();

        let mut pairs = Vec::with_capacity(n);
        let mut client_loss = Vec::with_capacity(n);
        for (i, shard) in shards.iter().enumerate() {
            let (pair, loss) = self.client_gradient(i, shard)?;
            pairs.push(pair);
            client_loss.push(loss);
        }

        // ν-gradients live in the full N x L embedding space, zero outside
        // the client's own row.
        let nu_full: Vec<Vec<f64>> = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut full = vec![0.0; n * embed_dim];
                full[i * embed_dim..(i + 1) * embed_dim].copy_from_slice(&p.g_nu);
                full
            })
            .collect();
        let theta_refs: Vec<&[f64]> = pairs.iter().map(|p| p.g_theta.as_slice()).collect();
        let nu_refs: Vec<&[f64]> = nu_full.iter().map(Vec::as_slice).collect();
        let (align_theta, align_nu): (Alignment, Alignment) = if self.config.gradalign_enabled {
            (
                grad_align(&theta_refs, self.config.gradalign_sign)?,
                grad_align(&nu_refs, self.config.gradalign_sign)?,
            )
        } else {
            (
                uniform_alignment(&theta_refs)?,
                uniform_alignment(&nu_refs)?,
            )
        };

        let mut g_theta = vec![0.0; self.hypernet.theta.len()];
        let mut g_nu = vec![0.0; n * embed_dim];
        for i in 0..n {
            axpy(align_theta.weights[i], theta_refs[i], &mut g_theta);
            axpy(align_nu.weights[i], nu_refs[i], &mut g_nu);
        }
        let trace = RoundTrace {
            round: self.round,
            cos_theta: align_theta.cosines,
            weights_theta: align_theta.weights,
            cos_nu: align_nu.cosines,
            weights_nu: align_nu.weights,
            grad_norm_theta: norm(&g_theta),
            grad_norm_nu: norm(&g_nu),
            client_loss,
        };

        self.apply_update(g_theta, g_nu);
        if self.config.ema_enabled {
            ema_step(
                &mut self.hypernet,
                self.round,
                self.config.ema_decay,
                self.config.ema_warmup,
            );
        }
        if self.config.embedding_mode == EmbeddingMode::RandomizedEachRound {
            self.hypernet.embeddings =
                Hypernetwork::draw_embeddings(n, embed_dim, &mut self.server_rng);
        }
        if !(self.hypernet.theta.is_finite() && self.hypernet.embeddings.is_finite()) {
            return Err(Error::NonFinite {
                context: "hypernetwork parameters",
            });
        }
        self.round += 1;
        Ok(trace)
    }

    fn apply_update(&mut self, mut g_theta: Vec<f64>, mut g_nu: Vec<f64>) {
        let wd = self.config.server_weight_decay;
        let lr = self.config.server_lr;
        if wd > 0.0 {
            axpy(wd, self.hypernet.theta.values(), &mut g_theta);
            if self.config.decay_embeddings {
                axpy(wd, self.hypernet.embeddings.as_slice(), &mut g_nu);
            }
        }
        match self.adam.as_mut() {
            None => {
                axpy(-lr, &g_theta, self.hypernet.theta.values_mut());
                axpy(-lr, &g_nu, self.hypernet.embeddings.as_mut_slice());
            }
            Some(adam) => {
                let split = g_theta.len();
                g_theta.extend_from_slice(&g_nu);
                let dir = adam.direction(&g_theta);
                axpy(-lr, &dir[..split], self.hypernet.theta.values_mut());
                axpy(-lr, &dir[split..], self.hypernet.embeddings.as_mut_slice());
            }
        }
    }
}

/// Builds the per-client random streams `"{prefix}/c{i}"`.
pub(crate) fn client_streams(seed: u64, prefix: &str, n: usize) -> Vec<RngStream> {
    (0..n)
        .map(|i| RngStream::new(seed, format!("{prefix}/c{i}")))
        .collect()
}
