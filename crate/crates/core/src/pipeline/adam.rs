use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `w` in place; `t` is the 1-based step.
pub fn adam_update<T: Scalar>(w: &mut [T], g: &[T], m: &mut [T], v: &mut [T], t: u64, cfg: &AdamConfig) -> Result<()> {
    if t < 1 {
        return Err(Error::invalid("Adam step counter starts at 1"));
    }
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - cfg.beta1), T::of(1.0 - cfg.beta2));
    let c1 = T::of(1.0 / (1.0 - cfg.beta1.powi(t as i32)));
    let c2 = T::of(1.0 / (1.0 - cfg.beta2.powi(t as i32)));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for i in 0..w.len() {
        m[i] = b1 * m[i] + one_b1 * g[i];
        v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
        let mh = m[i] * c1;
        let vh = v[i] * c2;
        w[i] = w[i] - lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}

/// Adam state over every tensor of a parameter store.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = || store.iter().map(|p| vec![T::zero(); p.value.numel()]).collect();
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies the stored gradients.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        self.t += 1;
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            adam_update(p.value.data_mut(), p.grad.data(), m, v, self.t, &self.config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_zero_rejected() {
        let mut w = [1.0];
        assert!(adam_update(&mut w, &[1.0], &mut [0.0], &mut [0.0], 0, &AdamConfig::default()).is_err());
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let (mut w, mut m, mut v) = ([0.7f64], [0.2], [0.1]);
        adam_update(&mut w, &[0.0], &mut m, &mut v, 3, &AdamConfig::default()).unwrap();
        assert!(m[0] < 0.2 && v[0] < 0.1);
        // update is driven only by the decaying first moment
        assert!(w[0] < 0.7);
        let (mut w, mut m, mut v) = ([0.7f64], [0.0], [0.0]);
        adam_update(&mut w, &[0.0], &mut m, &mut v, 1, &AdamConfig::default()).unwrap();
        assert_eq!(w[0], 0.7);
    }
}
