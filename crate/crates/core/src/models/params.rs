use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::math::Matrix;

/// One affine layer: a `rows x cols` weight (stored `(out, in)`, row-major)
/// followed by a bias of length `rows`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    #[inline]
    pub fn weight_len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.rows * self.cols + self.rows
    }
}

/// Ordered layer shapes that give meaning to a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    layers: Vec<LayerShape>,
}

impl Layout {
    pub fn new(layers: Vec<LayerShape>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Total parameter count.
    pub fn size(&self) -> usize {
        self.layers.iter().map(LayerShape::size).sum()
    }

    /// Start offset of every layer, plus the total as a final entry.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        out.push(0);
        for l in &self.layers {
            acc += l.size();
            out.push(acc);
        }
        out
    }
}

/// Flat parameter vector with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: Layout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        let n = layout.size();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        ensure_dim("ParamVector::from_values", layout.size(), values.len())?;
        Ok(Self { layout, values })
    }

    /// Packs per-layer `(weight, bias)` pairs, in layout order.
    pub fn from_layers(layout: Layout, layers: &[(Matrix, Vec<f64>)]) -> Result<Self> {
        ensure_dim("ParamVector::from_layers", layout.len(), layers.len())?;
        let mut values = Vec::with_capacity(layout.size());
        for (shape, (w, b)) in layout.layers().iter().zip(layers) {
            if w.rows() != shape.rows || w.cols() != shape.cols || b.len() != shape.rows {
                return Err(Error::Layout {
                    op: "ParamVector::from_layers",
                });
            }
            values.extend_from_slice(w.as_slice());
            values.extend_from_slice(b);
        }
        Ok(Self { layout, values })
    }

    /// Unpacks into per-layer `(weight, bias)` pairs.
    pub fn to_layers(&self) -> Vec<(Matrix, Vec<f64>)> {
        (0..self.layout.len())
            .map(|i| (self.weight(i), self.bias(i).to_vec()))
            .collect()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn offset(&self, layer: usize) -> usize {
        self.layout.layers[..layer]
            .iter()
            .map(LayerShape::size)
            .sum()
    }

    /// The full slice (weight then bias) of one layer.
    pub fn layer(&self, layer: usize) -> &[f64] {
        let start = self.offset(layer);
        &self.values[start..start + self.layout.layers[layer].size()]
    }

    pub fn layer_mut(&mut self, layer: usize) -> &mut [f64] {
        let start = self.offset(layer);
        let len = self.layout.layers[layer].size();
        &mut self.values[start..start + len]
    }

    pub fn weight_slice(&self, layer: usize) -> &[f64] {
        let shape = &self.layout.layers[layer];
        &self.layer(layer)[..shape.weight_len()]
    }

    pub fn weight(&self, layer: usize) -> Matrix {
        let shape = &self.layout.layers[layer];
        Matrix::from_vec(shape.rows, shape.cols, self.weight_slice(layer).to_vec())
            .expect("layout-consistent slice")
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let shape = &self.layout.layers[layer];
        &self.layer(layer)[shape.weight_len()..]
    }

    pub fn check_layout(&self, other: &Layout, op: &'static str) -> Result<()> {
        if &self.layout == other {
            Ok(())
        } else {
            Err(Error::Layout { op })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
