//! A from-scratch dense reference for the client MLP and the
//! hypernetwork, and the single-client composite SGD loop built on it.

use hfedf_core::data::LabeledSet;
use hfedf_core::federation::{DeltaSeed, FederationState, HFedFConfig};
use hfedf_core::math::{Matrix, RngStream};
use hfedf_core::models::{ClientModel, HyperConfig};

pub const SLOPE: f64 = 0.01;

pub fn random_set(n: usize, dim: usize, classes: usize, rng: &mut RngStream) -> LabeledSet {
    let x = Matrix::from_vec(n, dim, (0..n * dim).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
    let y = (0..n).map(|_| rng.below(classes)).collect();
    LabeledSet { x, y }
}

/// Independent dense reference: shapes are `(out, in)` and each block is
/// a row-major weight followed by the bias.
pub struct Dense {
    pub shapes: Vec<(usize, usize)>,
}

impl Dense {
    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for &(o, i) in &self.shapes {
            off.push(off.last().unwrap() + o * i + o);
        }
        off
    }

    fn layer(&self, p: &[f64], k: usize, x: &[f64]) -> Vec<f64> {
        let (o, i) = self.shapes[k];
        let base = self.offsets()[k];
        (0..o)
            .map(|r| {
                let mut s = p[base + o * i + r];
                for c in 0..i {
                    s += p[base + r * i + c] * x[c];
                }
                s
            })
            .collect()
    }

    /// Back-propagates `dz` through layer `k` with input `x`, accumulating
    /// into `grad`; returns d/dx.
    fn layer_back(&self, p: &[f64], k: usize, x: &[f64], dz: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (o, i) = self.shapes[k];
        let base = self.offsets()[k];
        let mut dx = vec![0.0; i];
        for r in 0..o {
            grad[base + o * i + r] += dz[r];
            for c in 0..i {
                grad[base + r * i + c] += dz[r] * x[c];
                dx[c] += p[base + r * i + c] * dz[r];
            }
        }
        dx
    }
}

/// Mean cross-entropy gradient of a ReLU MLP, sample by sample.
pub fn mlp_grad(net: &Dense, p: &[f64], set: &LabeledSet) -> Vec<f64> {
    let mut grad = vec![0.0; p.len()];
    let depth = net.shapes.len();
    for s in 0..set.len() {
        let mut acts = vec![set.x.row(s).to_vec()];
        let mut pres = Vec::new();
        for k in 0..depth {
            let z = net.layer(p, k, acts.last().unwrap());
            let a = if k + 1 < depth {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pres.push(z);
            acts.push(a);
        }
        let logits = acts.last().unwrap();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|v| (v - m).exp()).sum();
        let mut dz: Vec<f64> = logits.iter().map(|v| (v - m).exp() / sum).collect();
        dz[set.y[s]] -= 1.0;
        for d in dz.iter_mut() {
            *d /= set.len() as f64;
        }
        for k in (0..depth).rev() {
            let dx = net.layer_back(p, k, &acts[k], &dz, &mut grad);
            if k > 0 {
                dz = dx
                    .iter()
                    .zip(&pres[k - 1])
                    .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                    .collect();
            }
        }
    }
    grad
}

/// Reference hypernetwork: trunk `Dense` plus one head per client block.
pub struct RefHyper {
    trunk: Dense,
    heads: Dense,
    n_heads: usize,
}

impl RefHyper {
    fn new(embed: usize, width: usize, depth: usize, client: &Dense) -> Self {
        let mut shapes = vec![(width, embed)];
        shapes.extend((1..depth).map(|_| (width, width)));
        let heads = client
            .shapes
            .iter()
            .map(|&(o, i)| (o * i + o, width))
            .collect();
        RefHyper {
            trunk: Dense { shapes },
            heads: Dense { shapes: heads },
            n_heads: client.shapes.len(),
        }
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        theta.split_at(*self.trunk.offsets().last().unwrap())
    }

    fn forward(&self, theta: &[f64], e: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let (t, h) = self.split(theta);
        let depth = self.trunk.shapes.len();
        let mut acts = vec![e.to_vec()];
        let mut pres = Vec::new();
        for k in 0..depth {
            let z = self.trunk.layer(t, k, acts.last().unwrap());
            let a = if k + 1 < depth {
                z.iter()
                    .map(|&v| if v > 0.0 { v } else { SLOPE * v })
                    .collect()
            } else {
                z.clone()
            };
            pres.push(z);
            acts.push(a);
        }
        let out = acts.last().unwrap().clone();
        let phi = (0..self.n_heads)
            .flat_map(|j| self.heads.layer(h, j, &out))
            .collect();
        (acts, pres, phi)
    }

    pub fn phi(&self, theta: &[f64], e: &[f64]) -> Vec<f64> {
        self.forward(theta, e).2
    }

    pub fn backward(&self, theta: &[f64], e: &[f64], dphi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (acts, pres, _) = self.forward(theta, e);
        let (t, h) = self.split(theta);
        let split = t.len();
        let mut grad = vec![0.0; theta.len()];
        let (gt, gh) = grad.split_at_mut(split);
        let out = acts.last().unwrap();
        let mut offs = vec![0];
        for &(rows, _) in &self.heads.shapes {
            offs.push(offs.last().unwrap() + rows);
        }
        let mut dout = vec![0.0; out.len()];
        for j in 0..self.n_heads {
            let dx = self
                .heads
                .layer_back(h, j, out, &dphi[offs[j]..offs[j + 1]], gh);
            for (a, b) in dout.iter_mut().zip(dx) {
                *a += b;
            }
        }
        let depth = self.trunk.shapes.len();
        let mut dz = dout;
        let mut de = Vec::new();
        for k in (0..depth).rev() {
            let dx = self.trunk.layer_back(t, k, &acts[k], &dz, gt);
            if k > 0 {
                dz = dx
                    .iter()
                    .zip(&pres[k - 1])
                    .map(|(d, z)| if *z > 0.0 { *d } else { SLOPE * d })
                    .collect();
            } else {
                de = dx;
            }
        }
        (grad, de)
    }
}

pub struct N1Setup {
    pub state: FederationState,
    pub shard: LabeledSet,
    pub client: Dense,
    pub hyper: RefHyper,
}

pub fn n1_setup(delta_seed: DeltaSeed) -> N1Setup {
    let model = ClientModel::new(4, vec![6], 3);
    let hcfg = HyperConfig {
        embed_dim: 1,
        trunk_width: 7,
        trunk_depth: 4,
        leaky_slope: SLOPE,
    };
    let config = HFedFConfig {
        rounds: 20,
        local_epochs: 2,
        batch_size: 1000,
        server_lr: 0.05,
        server_weight_decay: 0.0,
        client_lr: 0.1,
        client_weight_decay: 1e-3,
        ema_enabled: false,
        delta_seed,
        ..HFedFConfig::default()
    };
    let mut rng = RngStream::new(11, "n1");
    let shard = random_set(30, 4, 3, &mut rng);
    let state = FederationState::new(
        config,
        model,
        hcfg,
        &mut RngStream::new(11, "init"),
        vec![RngStream::new(11, "c0")],
        RngStream::new(11, "server"),
    )
    .unwrap();
    let client = Dense {
        shapes: vec![(6, 4), (3, 6)],
    };
    let hyper = RefHyper::new(1, 7, 4, &client);
    N1Setup {
        state,
        shard,
        client,
        hyper,
    }
}

/// Runs `rounds` of the library's single-client round next to the
/// reference loop and returns the largest deviation of θ and ν relative
/// to `max(1, |reference|)`.
pub fn n1_deviation(delta_seed: DeltaSeed, rounds: usize) -> f64 {
    let mut s = n1_setup(delta_seed);
    let cfg = s.state.config.clone();
    let mut theta = s.state.hypernet.theta.values().to_vec();
    let mut nu = s.state.hypernet.embeddings.row(0).to_vec();
    for _ in 0..rounds {
        let trace = s.state.round(std::slice::from_ref(&s.shard)).unwrap();
        assert_eq!(trace.weights_theta, vec![1.0]);
        let phi0 = s.hyper.phi(&theta, &nu);
        let seed = match delta_seed {
            DeltaSeed::ExactGradient => mlp_grad(&s.client, &phi0, &s.shard),
            DeltaSeed::LocalDelta => {
                let mut phi = phi0.clone();
                for _ in 0..cfg.local_epochs {
                    let g = mlp_grad(&s.client, &phi, &s.shard);
                    for (p, g) in phi.iter_mut().zip(g) {
                        *p -= cfg.client_lr * (g + cfg.client_weight_decay * *p);
                    }
                }
                phi0.iter().zip(&phi).map(|(a, b)| a - b).collect()
            }
        };
        let (g_theta, g_nu) = s.hyper.backward(&theta, &nu, &seed);
        theta
            .iter_mut()
            .zip(&g_theta)
            .for_each(|(t, g)| *t -= cfg.server_lr * g);
        nu.iter_mut()
            .zip(&g_nu)
            .for_each(|(t, g)| *t -= cfg.server_lr * g);
    }
    let lib = s
        .state
        .hypernet
        .theta
        .values()
        .iter()
        .chain(s.state.hypernet.embeddings.row(0));
    lib.zip(theta.iter().chain(&nu))
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}
