use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{init_params, InitScheme, Matrix, RngStream, DEFAULT_LEAKY_SLOPE};

use super::{LayerShape, Layout, ParamVector};

/// Shape of the hypernetwork: an embedding of width `embed_dim`, a trunk
/// of `trunk_depth` affine layers of width `trunk_width` with LeakyReLU
/// between them (none after the last), then one affine head per client
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub embed_dim: usize,
    pub trunk_width: usize,
    pub trunk_depth: usize,
    pub leaky_slope: f64,
}

impl HyperConfig {
    /// Trunk 50 wide and 4 deep; embedding width `floor(1 + n_clients / 4)`.
    pub fn for_clients(n_clients: usize) -> Self {
        Self {
            embed_dim: 1 + n_clients / 4,
            trunk_width: 50,
            trunk_depth: 4,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Layout of θ: trunk layers first, then one head per client layer.
    pub fn theta_layout(&self, client: &Layout) -> Layout {
        let mut layers = Vec::with_capacity(self.trunk_depth + client.len());
        for k in 0..self.trunk_depth {
            let cols = if k == 0 {
                self.embed_dim
            } else {
                self.trunk_width
            };
            layers.push(LayerShape::new(format!("trunk{k}"), self.trunk_width, cols));
        }
        for l in client.layers() {
            layers.push(LayerShape::new(
                format!("head.{}", l.name),
                l.size(),
                self.trunk_width,
            ));
        }
        Layout::new(layers)
    }
}

/// Vector-Jacobian products of one client's generated parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradPair {
    /// Aligned with θ.
    pub g_theta: Vec<f64>,
    /// Aligned with one embedding row.
    pub g_nu: Vec<f64>,
}

/// Smoothed copies of (θ, ν) maintained once EMA has warmed up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaShadow {
    pub theta: Vec<f64>,
    pub embeddings: Matrix,
}

/// `h(θ, ν[i])`: maps a client's embedding row to that client's full
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypernetwork {
    config: HyperConfig,
    client_layout: Layout,
    pub theta: ParamVector,
    /// One row per client.
    pub embeddings: Matrix,
    pub ema_shadow: Option<EmaShadow>,
}

struct TrunkTrace {
    /// Input to every trunk layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every trunk layer.
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, &bias)| bias + crate::math::dot(&w[o * cols..(o + 1) * cols], x))
        .collect()
}

impl Hypernetwork {
    /// Uniform fan-in θ and `N(0, 1)` embeddings.
    pub fn new(
        config: HyperConfig,
        client_layout: Layout,
        n_clients: usize,
        rng: &mut RngStream,
    ) -> Self {
        let theta_layout = config.theta_layout(&client_layout);
        let layers: Vec<(Matrix, Vec<f64>)> = theta_layout
            .layers()
            .iter()
            .map(|s| {
                let w = init_params(s.rows, s.cols, InitScheme::UniformFanIn, rng);
                let bound = 1.0 / libm::sqrt(s.cols as f64);
                let b = (0..s.rows).map(|_| rng.uniform(-bound, bound)).collect();
                (w, b)
            })
            .collect();
        let theta = ParamVector::from_layers(theta_layout, &layers).expect("consistent layout");
        let embeddings = Self::draw_embeddings(n_clients, config.embed_dim, rng);
        Self {
            config,
            client_layout,
            theta,
            embeddings,
            ema_shadow: None,
        }
    }

    pub fn draw_embeddings(n_clients: usize, embed_dim: usize, rng: &mut RngStream) -> Matrix {
        init_params(
            n_clients,
            embed_dim,
            InitScheme::Normal { std_dev: 1.0 },
            rng,
        )
    }

    /// Assembles a hypernetwork from explicit parameters.
    pub fn from_parts(
        config: HyperConfig,
        client_layout: Layout,
        theta: ParamVector,
        embeddings: Matrix,
    ) -> Result<Self> {
        theta.check_layout(
            &config.theta_layout(&client_layout),
            "Hypernetwork::from_parts",
        )?;
        crate::error::ensure_dim(
            "Hypernetwork::from_parts",
            config.embed_dim,
            embeddings.cols(),
        )?;
        Ok(Self {
            config,
            client_layout,
            theta,
            embeddings,
            ema_shadow: None,
        })
    }

    pub fn config(&self) -> &HyperConfig {
        &self.config
    }

    pub fn client_layout(&self) -> &Layout {
        &self.client_layout
    }

    pub fn n_clients(&self) -> usize {
        self.embeddings.rows()
    }

    fn check_client(&self, client: usize, op: &'static str) -> Result<()> {
        if client < self.n_clients() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                op,
                index: client,
                limit: self.n_clients(),
            })
        }
    }

    fn trunk(&self, embedding: &[f64]) -> TrunkTrace {
        let depth = self.config.trunk_depth;
        let slope = self.config.leaky_slope;
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut a = embedding.to_vec();
        for k in 0..depth {
            let shape = &self.theta.layout().layers()[k];
            let z = affine(
                self.theta.weight_slice(k),
                self.theta.bias(k),
                shape.cols,
                &a,
            );
            let next = if k + 1 < depth {
                z.iter()
                    .map(|&v| if v > 0.0 { v } else { slope * v })
                    .collect()
            } else {
                z.clone()
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        TrunkTrace {
            inputs,
            pre,
            out: a,
        }
    }

    /// Generates the parameters of client `client` from an arbitrary
    /// embedding row.
    pub fn forward_embedding(&self, embedding: &[f64]) -> Result<ParamVector> {
        crate::error::ensure_dim("hypernet_forward", self.config.embed_dim, embedding.len())?;
        let trace = self.trunk(embedding);
        let depth = self.config.trunk_depth;
        let mut values = Vec::with_capacity(self.client_layout.size());
        for j in 0..self.client_layout.len() {
            let k = depth + j;
            let shape = &self.theta.layout().layers()[k];
            values.extend(affine(
                self.theta.weight_slice(k),
                self.theta.bias(k),
                shape.cols,
                &trace.out,
            ));
        }
        ParamVector::from_values(self.client_layout.clone(), values)
    }

    pub fn forward(&self, client: usize) -> Result<ParamVector> {
        self.check_client(client, "hypernet_forward")?;
        self.forward_embedding(self.embeddings.row(client))
    }

    /// `(∂h/∂θ)ᵀ·δ` and `(∂h/∂ν[i])ᵀ·δ` in a single reverse pass.
    pub fn vjp(&self, client: usize, delta: &ParamVector) -> Result<GradPair> {
        self.check_client(client, "hypernet_vjp")?;
        delta.check_layout(&self.client_layout, "hypernet_vjp")?;
        let trace = self.trunk(self.embeddings.row(client));
        let depth = self.config.trunk_depth;
        let width = self.config.trunk_width;
        let slope = self.config.leaky_slope;
        let theta_layout = self.theta.layout();
        let offsets = theta_layout.offsets();
        let mut g_theta = vec![0.0; self.theta.len()];

        // Heads: g_W = δ zᵀ, g_b = δ, dz = Σ Wᵀ δ.
        let mut dz = vec![0.0; width];
        for j in 0..self.client_layout.len() {
            let k = depth + j;
            let d = delta.layer(j);
            let w = self.theta.weight_slice(k);
            let rows = theta_layout.layers()[k].rows;
            let g = &mut g_theta[offsets[k]..offsets[k + 1]];
            let (gw, gb) = g.split_at_mut(rows * width);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                let wrow = &w[o * width..(o + 1) * width];
                let grow = &mut gw[o * width..(o + 1) * width];
                for ((gi, &zi), (dzi, &wi)) in
                    grow.iter_mut().zip(&trace.out).zip(dz.iter_mut().zip(wrow))
                {
                    *gi = dv * zi;
                    *dzi += dv * wi;
                }
            }
            gb.copy_from_slice(d);
        }

        // Trunk, last layer first.
        for k in (0..depth).rev() {
            if k + 1 < depth {
                for (g, &z) in dz.iter_mut().zip(&trace.pre[k]) {
                    if z <= 0.0 {
                        *g *= slope;
                    }
                }
            }
            let shape = &theta_layout.layers()[k];
            let cols = shape.cols;
            let input = &trace.inputs[k];
            let w = self.theta.weight_slice(k);
            let g = &mut g_theta[offsets[k]..offsets[k + 1]];
            let (gw, gb) = g.split_at_mut(shape.rows * cols);
            let mut dprev = vec![0.0; cols];
            for (o, &dv) in dz.iter().enumerate() {
                let wrow = &w[o * cols..(o + 1) * cols];
                for i in 0..cols {
                    gw[o * cols + i] = dv * input[i];
                    dprev[i] += dv * wrow[i];
                }
            }
            gb.copy_from_slice(&dz);
            dz = dprev;
        }
        Ok(GradPair { g_theta, g_nu: dz })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ClientModel;

    fn tiny(seed: u64) -> Hypernetwork {
        let client = ClientModel::new(4, vec![8], 3);
        let cfg = HyperConfig {
            embed_dim: 2,
            trunk_width: 5,
            trunk_depth: 4,
            leaky_slope: 0.01,
        };
        Hypernetwork::new(cfg, client.layout(), 3, &mut RngStream::new(seed, "hn"))
    }

    #[test]
    fn output_length_matches_client_layout() {
        let h = tiny(1);
        let out = h.forward(2).unwrap();
        assert_eq!(out.len(), h.client_layout().size());
        assert_eq!(out, h.forward(2).unwrap());
    }

    #[test]
    fn zero_theta_gives_zero_output() {
        let mut h = tiny(2);
        h.theta.values_mut().iter_mut().for_each(|v| *v = 0.0);
        for c in 0..3 {
            assert!(h.forward(c).unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_delta_gives_zero_grads() {
        let h = tiny(3);
        let g = h
            .vjp(1, &ParamVector::zeros(h.client_layout().clone()))
            .unwrap();
        assert!(g.g_theta.iter().chain(&g.g_nu).all(|&v| v == 0.0));
        assert_eq!(g.g_theta.len(), h.theta.len());
        assert_eq!(g.g_nu.len(), 2);
    }

    #[test]
    fn bad_client_and_layout_are_rejected() {
        let h = tiny(4);
        assert!(matches!(h.forward(3), Err(Error::OutOfRange { .. })));
        let other = ClientModel::new(4, vec![7], 3).layout();
        assert!(matches!(
            h.vjp(0, &ParamVector::zeros(other)),
            Err(Error::Layout { .. })
        ));
    }

    #[test]
    fn default_embedding_width() {
        assert_eq!(HyperConfig::for_clients(3).embed_dim, 1);
        assert_eq!(HyperConfig::for_clients(4).embed_dim, 2);
        assert_eq!(HyperConfig::for_clients(9).embed_dim, 3);
    }
}
