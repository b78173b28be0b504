use super::{Gradients, ParamKind, ParamStore};
use crate::error::{Error, Result};

/// Adaptive-moment optimizer settings. `decoupled = true` gives AdamW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decoupled: bool,
}

impl AdamConfig {
    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, decoupled: false }
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        AdamConfig { decoupled: true, ..Self::adam(lr, weight_decay) }
    }
}

fn check_finite(grads: &Gradients) -> Result<()> {
    if grads.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("gradient".into()))
    }
}

/// One bias-corrected Adam/AdamW step on every parameter of `kind`.
/// Parameters without an entry in `grads` are stepped with a zero gradient.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, kind: ParamKind, cfg: &AdamConfig) -> Result<()> {
    check_finite(grads)?;
    for (id, p) in store.iter_mut().filter(|(_, p)| p.kind == kind) {
        let g = grads.get(id);
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let w = p.tensor.data_mut();
        for i in 0..w.len() {
            let mut gi = g.map_or(0.0, |g| g[i]);
            if !cfg.decoupled {
                gi += cfg.weight_decay * w[i];
            }
            let m = cfg.beta1 * p.first_moment[i] + (1.0 - cfg.beta1) * gi;
            let v = cfg.beta2 * p.second_moment[i] + (1.0 - cfg.beta2) * gi * gi;
            p.first_moment[i] = m;
            p.second_moment[i] = v;
            if cfg.decoupled {
                w[i] -= cfg.lr * cfg.weight_decay * w[i];
            }
            w[i] -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Plain gradient descent: w ← w − lr·g on every parameter of `kind`.
pub fn sgd_step(store: &mut ParamStore, grads: &Gradients, kind: ParamKind, lr: f64) -> Result<()> {
    check_finite(grads)?;
    for (id, p) in store.iter_mut().filter(|(_, p)| p.kind == kind) {
        if let Some(g) = grads.get(id) {
            p.tensor.data_mut().iter_mut().zip(g).for_each(|(w, gv)| *w -= lr * gv);
        }
    }
    Ok(())
}
