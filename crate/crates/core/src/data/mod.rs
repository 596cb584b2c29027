//! Synthetic multi-domain data, the domain splitter, leave-one-domain-out
//! evaluation splits and few-shot target injection.
//!
//! Splits never copy samples: they hold [`SampleRef`]s into the domain
//! list, and [`materialize`] gathers a [`LabeledSet`] when training needs
//! contiguous features.

mod eval;
mod split;
mod synthetic;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

pub use eval::{inject_few_shot, make_eval_split, EvalSplit, DEFAULT_HOLDOUT_FRAC};
pub use split::{split_domains, Part, SplitPlan};
pub use synthetic::{gen_synthetic_domains, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    pub domain_id: usize,
    pub samples: Vec<Sample>,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Address of one sample: `(domain_id, index within that domain)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleRef {
    pub domain: usize,
    pub index: usize,
}

/// Contiguous features and labels ready for batching.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledSet {
        LabeledSet {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Stacks several sets row-wise.
    pub fn concat(sets: &[&LabeledSet]) -> Result<LabeledSet> {
        let cols = sets.first().map_or(0, |s| s.x.cols());
        let mut data = Vec::new();
        let mut y = Vec::new();
        for s in sets {
            crate::error::ensure_dim("LabeledSet::concat", cols, s.x.cols())?;
            data.extend_from_slice(s.x.as_slice());
            y.extend_from_slice(&s.y);
        }
        Ok(LabeledSet {
            x: Matrix::from_vec(y.len(), cols, data)?,
            y,
        })
    }
}

/// Looks a domain up by id; domain lists are indexed by id.
pub(crate) fn domain_by_id(domains: &[DomainDataset], id: usize) -> Result<&DomainDataset> {
    domains
        .get(id)
        .filter(|d| d.domain_id == id)
        .ok_or(Error::OutOfRange {
            op: "domain lookup",
            index: id,
            limit: domains.len(),
        })
}

/// Gathers referenced samples into a [`LabeledSet`].
pub fn materialize(refs: &[SampleRef], domains: &[DomainDataset]) -> Result<LabeledSet> {
    let cols = domains
        .first()
        .and_then(|d| d.samples.first())
        .map_or(0, |s| s.features.len());
    let mut data = Vec::with_capacity(refs.len() * cols);
    let mut y = Vec::with_capacity(refs.len());
    for r in refs {
        let domain = domain_by_id(domains, r.domain)?;
        let s = domain.samples.get(r.index).ok_or(Error::OutOfRange {
            op: "materialize",
            index: r.index,
            limit: domain.len(),
        })?;
        crate::error::ensure_dim("materialize", cols, s.features.len())?;
        data.extend_from_slice(&s.features);
        y.push(s.label);
    }
    Ok(LabeledSet {
        x: Matrix::from_vec(y.len(), cols, data)?,
        y,
    })
}
