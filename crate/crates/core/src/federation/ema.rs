use alloc::vec::Vec;

use crate::models::{EmaShadow, Hypernetwork};

fn blend(current: &mut [f64], shadow: &mut [f64], decay: f64) {
    for (c, s) in current.iter_mut().zip(shadow.iter_mut()) {
        *s = decay * *c + (1.0 - decay) * *s;
        *c = *s;
    }
}

/// EMA on a flat parameter slice at round `t`.
///
/// At `t == warmup` the shadow is initialized to `current`; for
/// `t > warmup` the shadow becomes `decay * current + (1 - decay) * shadow`
/// and is written back into `current`. Before warm-up nothing happens.
pub fn ema_update(
    current: &mut [f64],
    shadow: &mut Option<Vec<f64>>,
    t: usize,
    decay: f64,
    warmup: usize,
) {
    if t == warmup {
        *shadow = Some(current.to_vec());
    } else if t > warmup {
        if let Some(s) = shadow.as_mut() {
            blend(current, s, decay);
        }
    }
}

/// [`ema_update`] applied jointly to θ and the embeddings.
pub fn ema_step(hn: &mut Hypernetwork, t: usize, decay: f64, warmup: usize) {
    if t == warmup {
        hn.ema_shadow = Some(EmaShadow {
            theta: hn.theta.values().to_vec(),
            embeddings: hn.embeddings.clone(),
        });
    } else if t > warmup {
        if let Some(shadow) = hn.ema_shadow.as_mut() {
            blend(hn.theta.values_mut(), &mut shadow.theta, decay);
            blend(
                hn.embeddings.as_mut_slice(),
                shadow.embeddings.as_mut_slice(),
                decay,
            );
        }
    }
}
