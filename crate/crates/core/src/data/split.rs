use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RngStream;

use super::{DomainDataset, SampleRef};

/// One piece of one domain handed to one client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    pub domain_id: usize,
    pub indices: Vec<usize>,
}

impl Part {
    pub fn refs(&self) -> impl Iterator<Item = SampleRef> + '_ {
        self.indices.iter().map(move |&index| SampleRef {
            domain: self.domain_id,
            index,
        })
    }
}

/// Assignment of source-domain parts to clients, `d` domains each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_clients: usize,
    pub d: usize,
    pub assignments: Vec<Vec<Part>>,
}

impl SplitPlan {
    pub fn source_domains(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .assignments
            .iter()
            .flatten()
            .map(|p| p.domain_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn client_refs(&self, client: usize) -> Vec<SampleRef> {
        self.assignments[client]
            .iter()
            .flat_map(Part::refs)
            .collect()
    }
}

/// Splits the source domains across `n_clients` so that every client holds
/// exactly `d` distinct domains.
///
/// With `K` domains, `a = floor(N d / K)` and `b = N d mod K`: the `b`
/// largest domains (ties by id) are cut into `a + 1` near-equal parts, the
/// rest into `a`. Parts are then dealt round-robin, each client taking the
/// next part of the first domain that still has parts, and the client
/// order is shuffled. Since no domain has more than `N` parts and a
/// domain's parts are dealt consecutively, no client receives the same
/// domain twice.
pub fn split_domains(
    domains: &[DomainDataset],
    n_clients: usize,
    d: usize,
    rng: &mut RngStream,
) -> Result<SplitPlan> {
    let k = domains.len();
    if n_clients < 2 {
        return Err(Error::config("n_clients", "need more than one client"));
    }
    if d == 0 || d > k {
        return Err(Error::config(
            "d",
            alloc::format!("domains per client must be in [1, {k}]"),
        ));
    }
    if n_clients * d < k {
        return Err(Error::config(
            "d",
            alloc::format!(
                "n_clients * d = {} cannot cover {k} source domains",
                n_clients * d
            ),
        ));
    }
    let a = n_clients * d / k;
    let b = n_clients * d % k;

    let mut by_size: Vec<usize> = (0..k).collect();
    by_size.sort_by(|&i, &j| {
        domains[j]
            .len()
            .cmp(&domains[i].len())
            .then(domains[i].domain_id.cmp(&domains[j].domain_id))
    });
    let mut n_parts = alloc::vec![a; k];
    for &pos in &by_size[..b] {
        n_parts[pos] += 1;
    }

    let mut subsets: Vec<VecDeque<Part>> = Vec::with_capacity(k);
    for (domain, &parts) in domains.iter().zip(&n_parts) {
        if domain.len() < parts {
            return Err(Error::config(
                "samples_per_domain",
                alloc::format!(
                    "domain {} has {} samples, fewer than its {parts} parts",
                    domain.domain_id,
                    domain.len()
                ),
            ));
        }
        let mut idx: Vec<usize> = (0..domain.len()).collect();
        rng.shuffle(&mut idx);
        let base = domain.len() / parts;
        let extra = domain.len() % parts;
        let mut start = 0;
        let mut queue = VecDeque::with_capacity(parts);
        for p in 0..parts {
            let len = base + usize::from(p < extra);
            queue.push_back(Part {
                domain_id: domain.domain_id,
                indices: idx[start..start + len].to_vec(),
            });
            start += len;
        }
        subsets.push(queue);
    }

    let mut dealt: Vec<Vec<Part>> = (0..n_clients).map(|_| Vec::with_capacity(d)).collect();
    for _ in 0..d {
        for slot in dealt.iter_mut() {
            if let Some(queue) = subsets.iter_mut().find(|q| !q.is_empty()) {
                slot.push(queue.pop_front().expect("non-empty"));
            }
        }
    }
    debug_assert!(subsets.iter().all(VecDeque::is_empty));

    let mut order: Vec<usize> = (0..n_clients).collect();
    rng.shuffle(&mut order);
    let mut assignments: Vec<Vec<Part>> = (0..n_clients).map(|_| Vec::new()).collect();
    for (slot, parts) in dealt.into_iter().enumerate() {
        assignments[order[slot]] = parts;
    }
    Ok(SplitPlan {
        n_clients,
        d,
        assignments,
    })
}
