//! Adam optimizer over the full parameter set.

use serde::{Deserialize, Serialize};

use super::{ModelWeights, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, plus the step counter used for bias
/// correction.
pub struct AdamState<F> {
    m: ModelWeights<F>,
    v: ModelWeights<F>,
    step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(weights: &ModelWeights<F>) -> Self {
        AdamState {
            m: ModelWeights::zeros(weights.config.clone()),
            v: ModelWeights::zeros(weights.config.clone()),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place. Rejects non-finite gradients
/// before touching any state so a bad batch cannot poison the moments.
pub fn adam_step<F: Scalar>(
    weights: &mut ModelWeights<F>,
    grads: &ModelWeights<F>,
    state: &mut AdamState<F>,
    config: &AdamConfig,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = F::from_f64(config.beta1).expect("fits");
    let b2 = F::from_f64(config.beta2).expect("fits");
    let lr = F::from_f64(config.lr).expect("fits");
    let eps = F::from_f64(config.epsilon).expect("fits");
    let one = F::one();
    let corr1 = one - b1.powi(t);
    let corr2 = one - b2.powi(t);

    let g_flat = grads.flat_tensors();
    let mut m_flat = state.m.flat_tensors_mut();
    let mut v_flat = state.v.flat_tensors_mut();
    for (((_, w), (_, g)), ((_, m), (_, v))) in weights
        .flat_tensors_mut()
        .into_iter()
        .zip(g_flat)
        .zip(m_flat.iter_mut().zip(v_flat.iter_mut()))
    {
        for k in 0..w.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (one - b1) * gk;
            v[k] = b2 * v[k] + (one - b2) * gk * gk;
            let m_hat = m[k] / corr1;
            let v_hat = v[k] / corr2;
            w[k] = w[k] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
