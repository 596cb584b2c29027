use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::models::{ClientModel, ParamVector};

/// Local SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTraining {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Proximal coefficient ρ; only used when an anchor is given.
    pub prox: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub params: ParamVector,
    /// Mean mini-batch loss over the last epoch.
    pub loss: f64,
    pub steps: usize,
}

/// Runs `epochs` of mini-batch SGD on cross-entropy with L2 weight decay
/// and, when `anchor` is set, the proximal term `ρ/2 |φ - anchor|²`.
///
/// Every epoch draws a fresh permutation from `rng`; the final short batch
/// is kept.
pub fn client_update(
    model: &ClientModel,
    params: &ParamVector,
    shard: &LabeledSet,
    opts: &LocalTraining,
    anchor: Option<&ParamVector>,
    rng: &mut RngStream,
) -> Result<LocalResult> {
    if shard.is_empty() {
        return Err(Error::config("shard", "client shard is empty"));
    }
    if opts.epochs == 0 || opts.batch_size == 0 {
        return Err(Error::config(
            "local_epochs",
            "epochs and batch size must be >= 1",
        ));
    }
    if let Some(a) = anchor {
        a.check_layout(params.layout(), "client_update")?;
    }
    let mut phi = params.clone();
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut steps = 0;
    let mut epoch_loss = 0.0;
    for _ in 0..opts.epochs {
        rng.shuffle(&mut order);
        epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(opts.batch_size) {
            let batch = shard.subset(chunk);
            let (loss, grad) = model.backward(&phi, &batch.x, &batch.y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: "client loss",
                });
            }
            epoch_loss += loss;
            batches += 1;
            let values = phi.values_mut();
            match anchor {
                Some(a) if opts.prox > 0.0 => {
                    for ((p, g), &a) in values.iter_mut().zip(grad.values()).zip(a.values()) {
                        *p -= opts.lr * (g + opts.weight_decay * *p + opts.prox * (*p - a));
                    }
                }
                _ => {
                    for (p, g) in values.iter_mut().zip(grad.values()) {
                        *p -= opts.lr * (g + opts.weight_decay * *p);
                    }
                }
            }
            steps += 1;
        }
        epoch_loss /= batches as f64;
    }
    if !phi.is_finite() {
        return Err(Error::NonFinite {
            context: "client parameters",
        });
    }
    Ok(LocalResult {
        params: phi,
        loss: epoch_loss,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Matrix;
    use alloc::vec;

    fn opts(lr: f64, wd: f64, epochs: usize, batch: usize) -> LocalTraining {
        LocalTraining {
            epochs,
            lr,
            batch_size: batch,
            weight_decay: wd,
            prox: 0.0,
        }
    }

    fn toy(rng: &mut RngStream) -> LabeledSet {
        let n = 24;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            data.push(sign * 2.0 + rng.normal(0.0, 0.3));
            data.push(rng.normal(0.0, 1.0));
            y.push(label);
        }
        LabeledSet {
            x: Matrix::from_vec(n, 2, data).unwrap(),
            y,
        }
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let model = ClientModel::new(2, vec![4], 2);
        let mut rng = RngStream::new(0, "c");
        let params = model.init(&mut rng);
        let shard = toy(&mut rng);
        let out = client_update(
            &model,
            &params,
            &shard,
            &opts(0.0, 1e-3, 2, 5),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.params, params);
    }

    #[test]
    fn full_batch_descent_decreases_loss() {
        // Softmax regression is convex; a small full-batch step must descend.
        let model = ClientModel::new(2, vec![], 2);
        let mut rng = RngStream::new(1, "c");
        let mut params = model.init(&mut rng);
        let shard = toy(&mut rng);
        let mut prev = model.backward(&params, &shard.x, &shard.y).unwrap().0;
        for _ in 0..10 {
            params = client_update(
                &model,
                &params,
                &shard,
                &opts(0.1, 0.0, 1, 1000),
                None,
                &mut rng,
            )
            .unwrap()
            .params;
            let loss = model.backward(&params, &shard.x, &shard.y).unwrap().0;
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn weight_decay_shrinks_by_closed_form() {
        // Zero inputs: the first layer's weight gradient vanishes, so only
        // decay acts on it.
        let model = ClientModel::new(3, vec![], 2);
        let mut rng = RngStream::new(2, "c");
        let params = model.init(&mut rng);
        let shard = LabeledSet {
            x: Matrix::zeros(10, 3),
            y: (0..10).map(|i| i % 2).collect(),
        };
        let (mu, lambda) = (0.1, 0.5);
        let out = client_update(
            &model,
            &params,
            &shard,
            &opts(mu, lambda, 3, 4),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.steps, 9);
        let factor = (1.0 - mu * lambda).powi(9);
        for (a, b) in out
            .params
            .weight_slice(0)
            .iter()
            .zip(params.weight_slice(0))
        {
            assert!((a - factor * b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_shard_rejected() {
        let model = ClientModel::new(2, vec![], 2);
        let mut rng = RngStream::new(0, "c");
        let params = model.init(&mut rng);
        let shard = LabeledSet {
            x: Matrix::zeros(0, 2),
            y: vec![],
        };
        assert!(client_update(
            &model,
            &params,
            &shard,
            &opts(0.1, 0.0, 1, 4),
            None,
            &mut rng
        )
        .is_err());
    }
}
