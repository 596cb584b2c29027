use alloc::vec::Vec;

use crate::data::LabeledSet;
use crate::error::{ensure_dim, Error, Result};
use crate::math::RngStream;
use crate::models::{ClientModel, ParamVector};

use super::{client_update, LocalTraining};

/// Weighted mean of client parameters, weights proportional to `sizes`.
pub fn fedavg_aggregate(params: &[ParamVector], sizes: &[usize]) -> Result<ParamVector> {
    let first = params.first().ok_or(Error::Empty {
        op: "fedavg_aggregate",
    })?;
    ensure_dim("fedavg_aggregate", params.len(), sizes.len())?;
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Empty {
            op: "fedavg_aggregate",
        });
    }
    let mut out = ParamVector::zeros(first.layout().clone());
    for (p, &n) in params.iter().zip(sizes) {
        p.check_layout(first.layout(), "fedavg_aggregate")?;
        let w = n as f64 / total as f64;
        for (o, v) in out.values_mut().iter_mut().zip(p.values()) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn federated_round(
    model: &ClientModel,
    global: &ParamVector,
    shards: &[LabeledSet],
    opts: &LocalTraining,
    rngs: &mut [RngStream],
    proximal: bool,
) -> Result<(ParamVector, Vec<f64>)> {
    ensure_dim("fedavg_round", shards.len(), rngs.len())?;
    global.check_layout(&model.layout(), "fedavg_round")?;
    let mut updated = Vec::with_capacity(shards.len());
    let mut losses = Vec::with_capacity(shards.len());
    for (shard, rng) in shards.iter().zip(rngs.iter_mut()) {
        let anchor = if proximal { Some(global) } else { None };
        let local = client_update(model, global, shard, opts, anchor, rng)?;
        updated.push(local.params);
        losses.push(local.loss);
    }
    let sizes: Vec<usize> = shards.iter().map(LabeledSet::len).collect();
    Ok((fedavg_aggregate(&updated, &sizes)?, losses))
}

/// Broadcast `global`, train every client locally, return the
/// size-weighted mean and the clients' losses.
pub fn fedavg_round(
    model: &ClientModel,
    global: &ParamVector,
    shards: &[LabeledSet],
    opts: &LocalTraining,
    rngs: &mut [RngStream],
) -> Result<(ParamVector, Vec<f64>)> {
    federated_round(model, global, shards, opts, rngs, false)
}

/// [`fedavg_round`] with the proximal pull `opts.prox * (φ - global)` added
/// to every local gradient.
pub fn fedprox_round(
    model: &ClientModel,
    global: &ParamVector,
    shards: &[LabeledSet],
    opts: &LocalTraining,
    rngs: &mut [RngStream],
) -> Result<(ParamVector, Vec<f64>)> {
    federated_round(model, global, shards, opts, rngs, true)
}

/// Every client trains its own model with no communication.
pub fn local_round(
    model: &ClientModel,
    params: &mut [ParamVector],
    shards: &[LabeledSet],
    opts: &LocalTraining,
    rngs: &mut [RngStream],
) -> Result<Vec<f64>> {
    ensure_dim("local_round", shards.len(), params.len())?;
    ensure_dim("local_round", shards.len(), rngs.len())?;
    let mut losses = Vec::with_capacity(shards.len());
    for ((p, shard), rng) in params.iter_mut().zip(shards).zip(rngs.iter_mut()) {
        let local = client_update(model, p, shard, opts, None, rng)?;
        *p = local.params;
        losses.push(local.loss);
    }
    Ok(losses)
}

/// One round of training a single model on the pooled data.
pub fn central_round(
    model: &ClientModel,
    params: &mut ParamVector,
    pooled: &LabeledSet,
    opts: &LocalTraining,
    rng: &mut RngStream,
) -> Result<f64> {
    let local = client_update(model, params, pooled, opts, None, rng)?;
    *params = local.params;
    Ok(local.loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LayerShape, Layout};
    use alloc::vec;

    #[test]
    fn two_client_mean() {
        let layout = Layout::new(vec![LayerShape::new("w", 1, 0)]);
        let a = ParamVector::from_values(layout.clone(), vec![0.0]).unwrap();
        let b = ParamVector::from_values(layout, vec![2.0]).unwrap();
        let g = fedavg_aggregate(&[a, b], &[5, 5]).unwrap();
        assert_eq!(g.values(), &[1.0]);
    }

    #[test]
    fn size_weighting() {
        let layout = Layout::new(vec![LayerShape::new("w", 1, 0)]);
        let a = ParamVector::from_values(layout.clone(), vec![0.0]).unwrap();
        let b = ParamVector::from_values(layout, vec![4.0]).unwrap();
        let g = fedavg_aggregate(&[a, b], &[3, 1]).unwrap();
        assert_eq!(g.values(), &[1.0]);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let a = ParamVector::zeros(Layout::new(vec![LayerShape::new("w", 1, 1)]));
        let b = ParamVector::zeros(Layout::new(vec![LayerShape::new("w", 2, 1)]));
        assert!(fedavg_aggregate(&[a, b], &[1, 1]).is_err());
    }
}
