use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay. Moment buffers are created lazily on the
/// first step, one pair per parameter.
#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamWConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Result<Self> {
        if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", cfg.lr)));
        }
        if !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if cfg.weight_decay < 0.0 || cfg.eps <= 0.0 {
            return Err(Error::Config("weight decay must be ≥ 0 and eps > 0".into()));
        }
        Ok(AdamW {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// One update of every trainable parameter from its current gradient.
    /// Gradients are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.is_empty() {
            self.m = store.iter().map(|p| vec![0.0; p.tensor.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powf(self.t as f64);
        let bc2 = 1.0 - beta2.powf(self.t as f64);
        let shrink = 1.0 - lr * weight_decay;
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            let theta = p.tensor.data_mut();
            let grad = p.gradient.data();
            for i in 0..theta.len() {
                let g = grad[i];
                theta[i] *= shrink;
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
