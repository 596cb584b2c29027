use crate::error::{ensure_dim, Result};

/// Norm threshold below which a vector is treated as zero by
/// [`cosine_similarity`].
pub const COSINE_EPS: f64 = 1e-15;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// Cosine of the angle between `u` and `v`, clamped to [-1, 1]. Returns 0
/// when either norm is below [`COSINE_EPS`].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    ensure_dim("cosine_similarity", u.len(), v.len())?;
    let nu = norm(u);
    let nv = norm(v);
    if nu < COSINE_EPS || nv < COSINE_EPS {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
