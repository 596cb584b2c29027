use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::math::{cosine_similarity, softmax_row};

use super::SignMode;

/// Per-client cosines to the mean gradient and the resulting weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub cosines: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Weights client gradients by their cosine to the mean gradient, mapped
/// through a softmax (of `γ` or `-γ` according to `sign`).
pub fn grad_align(grads: &[&[f64]], sign: SignMode) -> Result<Alignment> {
    let first = grads.first().ok_or(Error::Empty { op: "grad_align" })?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for g in grads {
        ensure_dim("grad_align", dim, g.len())?;
        for (m, v) in mean.iter_mut().zip(g.iter()) {
            *m += v;
        }
    }
    let inv = 1.0 / grads.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    let cosines = grads
        .iter()
        .map(|g| cosine_similarity(&mean, g))
        .collect::<Result<Vec<f64>>>()?;
    let logits: Vec<f64> = match sign {
        SignMode::Plain => cosines.clone(),
        SignMode::Negated => cosines.iter().map(|c| -c).collect(),
    };
    Ok(Alignment {
        weights: softmax_row(&logits),
        cosines,
    })
}

/// Equal weights `1/N` with cosines still reported, used when alignment is
/// switched off.
pub fn uniform_alignment(grads: &[&[f64]]) -> Result<Alignment> {
    let mut a = grad_align(grads, SignMode::Plain)?;
    let w = 1.0 / grads.len() as f64;
    a.weights.iter_mut().for_each(|v| *v = w);
    Ok(a)
}
