use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RngStream;

use super::{domain_by_id, DomainDataset, SampleRef, SplitPlan};

/// Fraction of every client's source data held out for id-validation.
pub const DEFAULT_HOLDOUT_FRAC: f64 = 0.10;

/// Leave-one-domain-out split: per-client train and id-validation sets plus
/// the shared ood test set drawn from the target domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit {
    pub target_domain: usize,
    pub train: Vec<Vec<SampleRef>>,
    pub val: Vec<Vec<SampleRef>>,
    pub ood: Vec<SampleRef>,
    /// Target samples moved into each client's train set.
    pub injected: Vec<Vec<SampleRef>>,
}

impl EvalSplit {
    pub fn n_clients(&self) -> usize {
        self.train.len()
    }

    pub fn total_len(&self) -> usize {
        self.train.iter().map(Vec::len).sum::<usize>()
            + self.val.iter().map(Vec::len).sum::<usize>()
            + self.ood.len()
    }
}

/// Per-class holdout counts by largest remainder: the total is
/// `round(frac * n)` and each class gets its proportional share within 1.
fn class_quotas(counts: &[usize], frac: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let total = libm::round(frac * n as f64) as usize;
    let shares: Vec<f64> = counts.iter().map(|&c| frac * c as f64).collect();
    let mut quotas: Vec<usize> = shares
        .iter()
        .zip(counts)
        .map(|(&s, &c)| (libm::floor(s) as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = shares[i] - libm::floor(shares[i]);
        let rj = shares[j] - libm::floor(shares[j]);
        rj.partial_cmp(&ri)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut missing = total.saturating_sub(quotas.iter().sum());
    for &c in order.iter().cycle().take(counts.len() * 2) {
        if missing == 0 {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            missing -= 1;
        }
    }
    quotas
}

/// Holds out `holdout_frac` of each client's shard for validation,
/// stratified by class; the whole target domain becomes the ood test set.
pub fn make_eval_split(
    plan: &SplitPlan,
    domains: &[DomainDataset],
    target_domain: usize,
    holdout_frac: f64,
    rng: &mut RngStream,
) -> Result<EvalSplit> {
    if !(0.0..1.0).contains(&holdout_frac) {
        return Err(Error::config("holdout_frac", "must lie in [0, 1)"));
    }
    if plan.source_domains().contains(&target_domain) {
        return Err(Error::config(
            "target_domain",
            "target domain is also a source domain",
        ));
    }
    let target = domain_by_id(domains, target_domain)?;
    let n_classes = domains
        .iter()
        .flat_map(|d| d.samples.iter().map(|s| s.label + 1))
        .max()
        .unwrap_or(0);

    let mut train = Vec::with_capacity(plan.n_clients);
    let mut val = Vec::with_capacity(plan.n_clients);
    for client in 0..plan.n_clients {
        let shard = plan.client_refs(client);
        if shard.is_empty() {
            return Err(Error::config(
                "n_clients",
                "a client received an empty shard",
            ));
        }
        let mut by_class: Vec<Vec<usize>> = (0..n_classes).map(|_| Vec::new()).collect();
        for (pos, r) in shard.iter().enumerate() {
            let label = domain_by_id(domains, r.domain)?.samples[r.index].label;
            by_class[label].push(pos);
        }
        let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let quotas = class_quotas(&counts, holdout_frac);
        let mut held = alloc::vec![false; shard.len()];
        for (positions, &q) in by_class.iter_mut().zip(&quotas) {
            rng.shuffle(positions);
            for &p in &positions[..q] {
                held[p] = true;
            }
        }
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for (r, h) in shard.into_iter().zip(held) {
            if h {
                v.push(r);
            } else {
                t.push(r);
            }
        }
        train.push(t);
        val.push(v);
    }
    let ood = (0..target.len())
        .map(|index| SampleRef {
            domain: target_domain,
            index,
        })
        .collect();
    Ok(EvalSplit {
        target_domain,
        train,
        val,
        ood,
        injected: (0..plan.n_clients).map(|_| Vec::new()).collect(),
    })
}

/// Moves `shots_per_client` distinct target samples into every client's
/// train set, removing them from the ood test set.
pub fn inject_few_shot(
    split: &EvalSplit,
    target_domain: usize,
    shots_per_client: usize,
    rng: &mut RngStream,
) -> Result<EvalSplit> {
    if target_domain != split.target_domain {
        return Err(Error::config("target_domain", "does not match the split"));
    }
    if shots_per_client == 0 {
        return Ok(split.clone());
    }
    let need = shots_per_client * split.n_clients();
    if need > split.ood.len() {
        return Err(Error::config(
            "few_shot_shots",
            alloc::format!("{need} shots requested, target has {}", split.ood.len()),
        ));
    }
    let mut pool = split.ood.clone();
    rng.shuffle(&mut pool);
    let taken = &pool[..need];
    let mut out = split.clone();
    for (client, chunk) in taken.chunks(shots_per_client).enumerate() {
        out.train[client].extend_from_slice(chunk);
        out.injected[client].extend_from_slice(chunk);
    }
    let mut removed: Vec<SampleRef> = taken.to_vec();
    removed.sort_unstable();
    out.ood.retain(|r| removed.binary_search(r).is_err());
    Ok(out)
}
