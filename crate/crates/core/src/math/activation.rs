use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::Matrix;

/// Negative-side slope used by the hypernetwork trunk unless configured.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Derivative mask of [`relu`]: 1 where `x > 0`, else 0.
pub fn relu_grad(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Elementwise `max(x, slope * x)` for `slope` in (0, 1).
pub fn leaky_relu(x: &Matrix, slope: f64) -> Matrix {
    debug_assert!(slope > 0.0 && slope < 1.0);
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_grad(x: &Matrix, slope: f64) -> Matrix {
    x.map(|v| if v > 0.0 { 1.0 } else { slope })
}

/// Numerically stable softmax of one row of logits.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    logits.iter().map(|&z| z - lse).collect()
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..logits.rows() {
        let p = softmax_row(logits.row(r));
        out.row_mut(r).copy_from_slice(&p);
    }
    out
}

/// Cross-entropy of one sample and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// `softmax(logits) - one_hot(label)`
    pub grad: Vec<f64>,
}

pub fn cross_entropy(logits: &[f64], label: usize) -> Result<CrossEntropy> {
    if label >= logits.len() {
        return Err(Error::OutOfRange {
            op: "cross_entropy",
            index: label,
            limit: logits.len(),
        });
    }
    let log_p = log_softmax_row(logits);
    let loss = -log_p[label];
    let mut grad: Vec<f64> = log_p.iter().map(|&lp| libm::exp(lp)).collect();
    grad[label] -= 1.0;
    Ok(CrossEntropy { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;
    use alloc::vec;

    const H: f64 = 1e-6;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    #[test]
    fn leaky_relu_definition() {
        let x = Matrix::from_rows(&[&[-1.0, 2.0, 0.0]]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.as_slice(), &[-0.01, 2.0, 0.0]);
    }

    #[test]
    fn activation_derivatives_match_central_differences() {
        let mut rng = RngStream::new(3, "act-fd");
        for _ in 0..200 {
            let mut v = rng.uniform(-3.0, 3.0);
            if v.abs() < 1e-3 {
                v = 0.5;
            }
            let x = Matrix::from_vec(1, 1, vec![v]).unwrap();
            let f = |z: f64, act: &dyn Fn(&Matrix) -> Matrix| {
                act(&Matrix::from_vec(1, 1, vec![z]).unwrap()).get(0, 0)
            };
            let lr = |m: &Matrix| leaky_relu(m, 0.01);
            let fd = (f(v + H, &lr) - f(v - H, &lr)) / (2.0 * H);
            assert!(rel_err(fd, leaky_relu_grad(&x, 0.01).get(0, 0)) < 1e-5);
            let fd = (f(v + H, &relu) - f(v - H, &relu)) / (2.0 * H);
            let an = relu_grad(&x).get(0, 0);
            if an == 0.0 {
                assert!(fd.abs() < 1e-9);
            } else {
                assert!(rel_err(fd, an) < 1e-5);
            }
        }
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        for c in 2..8 {
            let ce = cross_entropy(&vec![0.3; c], 1).unwrap();
            assert!((ce.loss - libm::log(c as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logits_give_zero_loss() {
        let ce = cross_entropy(&[10.0, -10.0], 0).unwrap();
        assert!(ce.loss < 1e-8);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            cross_entropy(&[0.0, 1.0], 2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_fd() {
        let mut rng = RngStream::new(11, "ce-fd");
        for _ in 0..20 {
            let logits: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let label = rng.below(4);
            let ce = cross_entropy(&logits, label).unwrap();
            for k in 0..4 {
                let mut up = logits.clone();
                up[k] += H;
                let mut dn = logits.clone();
                dn[k] -= H;
                let fd = (cross_entropy(&up, label).unwrap().loss
                    - cross_entropy(&dn, label).unwrap().loss)
                    / (2.0 * H);
                assert!(rel_err(fd, ce.grad[k]) < 1e-5, "{fd} vs {}", ce.grad[k]);
            }
        }
    }

    #[test]
    fn softmax_is_a_simplex_element() {
        let mut rng = RngStream::new(5, "softmax");
        for _ in 0..100 {
            let logits: Vec<f64> = (0..6).map(|_| rng.uniform(-50.0, 50.0)).collect();
            let p = softmax_row(&logits);
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
