//! Brute-force checker for domain split plans.

use std::collections::{BTreeMap, BTreeSet};

use hfedf_core::data::{split_domains, DomainDataset, Sample, SplitPlan};
use hfedf_core::math::RngStream;

pub fn domains(sizes: &[usize]) -> Vec<DomainDataset> {
    sizes
        .iter()
        .enumerate()
        .map(|(id, &n)| DomainDataset {
            domain_id: id,
            samples: (0..n)
                .map(|i| Sample {
                    features: vec![i as f64],
                    label: 0,
                })
                .collect(),
        })
        .collect()
}

/// Disjoint, exhaustive, `d` distinct domains per client, and parts of a
/// domain within one sample of each other.
pub fn check(plan: &SplitPlan, doms: &[DomainDataset], n: usize, d: usize) -> Result<(), String> {
    if plan.assignments.len() != n {
        return Err(format!("{} clients, expected {n}", plan.assignments.len()));
    }
    let mut seen = BTreeSet::new();
    let mut part_sizes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, parts) in plan.assignments.iter().enumerate() {
        let ids: BTreeSet<usize> = parts.iter().map(|p| p.domain_id).collect();
        if ids.len() != d || parts.len() != d {
            return Err(format!(
                "client {c} holds {} parts over {} domains",
                parts.len(),
                ids.len()
            ));
        }
        for p in parts {
            part_sizes
                .entry(p.domain_id)
                .or_default()
                .push(p.indices.len());
            for r in p.refs() {
                if !seen.insert(r) {
                    return Err(format!("{r:?} assigned twice"));
                }
            }
        }
    }
    let total: usize = doms.iter().map(DomainDataset::len).sum();
    if seen.len() != total {
        return Err(format!("{} of {total} samples assigned", seen.len()));
    }
    for (dom, sizes) in &part_sizes {
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("domain {dom} part sizes {sizes:?}"));
        }
    }
    Ok(())
}

/// Checks every `(K, N, d)` with `K` in {3, 4}, `N` in 2..=8, `d` in
/// 1..=4, `N d >= K` and `d <= K`, over `reps` random size draws; returns
/// the number of plans checked.
pub fn check_grid(reps: u64) -> Result<usize, String> {
    let mut checked = 0;
    for k in [3usize, 4] {
        for n in 2..=8 {
            for d in 1..=4 {
                if n * d < k || d > k {
                    continue;
                }
                for rep in 0..reps {
                    let mut rng = RngStream::new(rep, format!("sizes/{k}/{n}/{d}"));
                    let sizes: Vec<usize> = (0..k).map(|_| 20 + rng.below(40)).collect();
                    let doms = domains(&sizes);
                    let plan = split_domains(&doms, n, d, &mut RngStream::new(rep, "split"))
                        .map_err(|e| format!("K={k} N={n} d={d}: {e}"))?;
                    check(&plan, &doms, n, d)
                        .map_err(|e| format!("K={k} N={n} d={d} sizes={sizes:?}: {e}"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Three unequal domains over two clients with two domains each: the
/// largest domain must be cut in two halves.
pub fn check_three_domain_case() -> Result<(), String> {
    let doms = domains(&[30, 50, 40]);
    let plan =
        split_domains(&doms, 2, 2, &mut RngStream::new(0, "fig")).map_err(|e| e.to_string())?;
    check(&plan, &doms, 2, 2)?;
    let sizes_of = |id: usize| -> Vec<usize> {
        let mut s: Vec<usize> = plan
            .assignments
            .iter()
            .flatten()
            .filter(|p| p.domain_id == id)
            .map(|p| p.indices.len())
            .collect();
        s.sort_unstable();
        s
    };
    if sizes_of(1) != vec![25, 25] || sizes_of(0) != vec![30] || sizes_of(2) != vec![40] {
        return Err(format!(
            "parts {:?} {:?} {:?}",
            sizes_of(0),
            sizes_of(1),
            sizes_of(2)
        ));
    }
    Ok(())
}
