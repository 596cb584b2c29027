//! Accuracy, per-layer weight divergence, prediction confidences and the
//! result table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::math::softmax_row;
use crate::models::{ClientModel, Layout, ParamVector};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn accuracy(model: &ClientModel, params: &ParamVector, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty { op: "accuracy" });
    }
    let logits = model.forward(params, &set.x)?;
    let hits = (0..set.len())
        .filter(|&r| argmax(logits.row(r)) == set.y[r])
        .count();
    Ok(hits as f64 / set.len() as f64)
}

/// Mean pairwise Euclidean distance per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub layers: Vec<LayerDivergence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDivergence {
    pub layer: String,
    pub mean_distance: f64,
}

/// For each layer, the mean over unordered client pairs of the Euclidean
/// distance between that layer's slices.
pub fn weight_divergence(vectors: &[ParamVector], layout: &Layout) -> Result<DivergenceReport> {
    if vectors.len() < 2 {
        return Err(Error::Empty {
            op: "weight_divergence",
        });
    }
    for v in vectors {
        v.check_layout(layout, "weight_divergence")?;
    }
    let offsets = layout.offsets();
    let pairs = (vectors.len() * (vectors.len() - 1) / 2) as f64;
    let layers = layout
        .layers()
        .iter()
        .enumerate()
        .map(|(l, shape)| {
            let range = offsets[l]..offsets[l + 1];
            let mut total = 0.0;
            for i in 0..vectors.len() {
                for j in i + 1..vectors.len() {
                    let a = &vectors[i].values()[range.clone()];
                    let b = &vectors[j].values()[range.clone()];
                    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    total += libm::sqrt(sq);
                }
            }
            LayerDivergence {
                layer: shape.name.clone(),
                mean_distance: total / pairs,
            }
        })
        .collect();
    Ok(DivergenceReport { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTag {
    Id,
    Ood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub predicted: usize,
    pub max_prob: f64,
    pub correct: bool,
    pub tag: EvalTag,
}

/// One record per sample: predicted class, its softmax probability and
/// whether it was right.
pub fn export_confidences(
    model: &ClientModel,
    params: &ParamVector,
    set: &LabeledSet,
    tag: EvalTag,
) -> Result<Vec<ConfidenceRecord>> {
    let logits = model.forward(params, &set.x)?;
    Ok((0..set.len())
        .map(|r| {
            let p = softmax_row(logits.row(r));
            let predicted = argmax(&p);
            ConfidenceRecord {
                predicted,
                max_prob: p[predicted],
                correct: predicted == set.y[r],
                tag,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub seed: u64,
    pub target_domain: usize,
    pub round: usize,
    pub id_acc: f64,
    pub ood_acc: f64,
}

/// Means over seeds and target domains for one `(algorithm, round)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub round: usize,
    pub mean_id: f64,
    pub mean_ood: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(String, usize), (f64, f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = groups
                .entry((r.algorithm.clone(), r.round))
                .or_insert((0.0, 0.0, 0));
            e.0 += r.id_acc;
            e.1 += r.ood_acc;
            e.2 += 1;
        }
        groups
            .into_iter()
            .map(|((algorithm, round), (id, ood, n))| SummaryRow {
                algorithm,
                round,
                mean_id: id / n as f64,
                mean_ood: ood / n as f64,
                count: n,
            })
            .collect()
    }

    /// Summary at each algorithm's last evaluated round.
    pub fn final_summary(&self) -> Vec<SummaryRow> {
        let mut last: BTreeMap<String, SummaryRow> = BTreeMap::new();
        for s in self.summary() {
            last.insert(s.algorithm.clone(), s);
        }
        last.into_values().collect()
    }

    pub fn final_for(&self, algorithm: &str) -> Option<SummaryRow> {
        self.final_summary()
            .into_iter()
            .find(|s| s.algorithm == algorithm)
    }
}
