use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result};
use crate::math::{cross_entropy, init_params, relu, relu_grad, InitScheme, Matrix, RngStream};

use super::{LayerShape, Layout, ParamVector};

/// Fully connected ReLU classifier `input -> hidden... -> n_classes`.
///
/// The model is stateless: parameters always travel separately as a
/// [`ParamVector`] laid out by [`ClientModel::layout`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientModel {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("at least one layer")
    }
}

impl ClientModel {
    pub fn new(input_dim: usize, hidden: Vec<usize>, n_classes: usize) -> Self {
        Self {
            input_dim,
            hidden,
            n_classes,
        }
    }

    pub fn layout(&self) -> Layout {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.n_classes);
        Layout::new(
            dims.windows(2)
                .enumerate()
                .map(|(i, w)| LayerShape::new(format!("fc{i}"), w[1], w[0]))
                .collect(),
        )
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    /// Uniform fan-in initialization of weights and biases.
    pub fn init(&self, rng: &mut RngStream) -> ParamVector {
        let layout = self.layout();
        let layers: Vec<(Matrix, Vec<f64>)> = layout
            .layers()
            .iter()
            .map(|s| {
                let w = init_params(s.rows, s.cols, InitScheme::UniformFanIn, rng);
                let bound = 1.0 / libm::sqrt(s.cols as f64);
                let b = (0..s.rows).map(|_| rng.uniform(-bound, bound)).collect();
                (w, b)
            })
            .collect();
        ParamVector::from_layers(layout, &layers).expect("layout built from model")
    }

    fn check(&self, params: &ParamVector, x: &Matrix) -> Result<()> {
        params.check_layout(&self.layout(), "client_forward")?;
        ensure_dim("client_forward", self.input_dim, x.cols())
    }

    pub fn forward_cached(&self, params: &ParamVector, x: &Matrix) -> Result<ForwardCache> {
        self.check(params, x)?;
        let n = self.n_layers();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.clone();
        for l in 0..n {
            let mut z = a.matmul_transb(&params.weight(l))?;
            z.add_row_broadcast(params.bias(l))?;
            let next = if l + 1 < n { relu(&z) } else { z.clone() };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardCache { inputs, pre })
    }

    /// Logits of shape `(batch, n_classes)`.
    pub fn forward(&self, params: &ParamVector, x: &Matrix) -> Result<Matrix> {
        let cache = self.forward_cached(params, x)?;
        Ok(cache.pre.into_iter().last().expect("at least one layer"))
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter.
    pub fn backward(
        &self,
        params: &ParamVector,
        x: &Matrix,
        labels: &[usize],
    ) -> Result<(f64, ParamVector)> {
        ensure_dim("client_backward", x.rows(), labels.len())?;
        let cache = self.forward_cached(params, x)?;
        let batch = x.rows();
        let inv = 1.0 / batch as f64;
        let logits = cache.logits();
        let mut loss = 0.0;
        let mut dz = Matrix::zeros(batch, self.n_classes);
        for (r, &y) in labels.iter().enumerate() {
            let ce = cross_entropy(logits.row(r), y)?;
            loss += ce.loss;
            for (d, g) in dz.row_mut(r).iter_mut().zip(&ce.grad) {
                *d = g * inv;
            }
        }
        loss *= inv;

        let n = self.n_layers();
        let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let gw = dz.matmul_transa(&cache.inputs[l])?;
            let gb = dz.column_sums();
            if l > 0 {
                let mut da = dz.matmul(&params.weight(l))?;
                da.hadamard_assign(&relu_grad(&cache.pre[l - 1]))?;
                dz = da;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        Ok((loss, ParamVector::from_layers(self.layout(), &grads)?))
    }
}
