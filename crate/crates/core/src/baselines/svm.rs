use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::NUM_CLASSES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, passes: 10 }
    }
}

/// One-vs-rest linear SVM trained by Pegasos-style subgradient descent on
/// `λ/2‖w‖² + mean hinge`, `λ = 1/(C·n)`. The last weight is a bias on a
/// constant input of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    classes: Vec<u8>,
    weights: Vec<Vec<f64>>,
}

/// `w = scale · v`, so the shrink step costs O(1).
struct Scaled {
    scale: f64,
    v: Vec<f64>,
}

impl Scaled {
    fn dot(&self, x: &SparseVec) -> f64 {
        let bias = self.v.len() - 1;
        self.scale * (x.dot_dense(&self.v) + self.v[bias])
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.fill(0.0);
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &SparseVec, coef: f64) {
        let c = coef / self.scale;
        for (i, v) in x.iter() {
            self.v[i as usize] += c * v;
        }
        let bias = self.v.len() - 1;
        self.v[bias] += c;
    }

    fn into_dense(self) -> Vec<f64> {
        self.v.into_iter().map(|w| w * self.scale).collect()
    }
}

impl LinearSvm {
    pub fn fit(xs: &[SparseVec], ys: &[u8], dim: usize, cfg: SvmConfig, seed: u64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::EmptyInput { op: "svm fit" });
        }
        if !(cfg.c > 0.0) {
            return Err(Error::Config("SVM C must be positive".into()));
        }
        let n = xs.len();
        let lambda = 1.0 / (cfg.c * n as f64);
        let mut classes: Vec<u8> = ys.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut weights = Vec::with_capacity(classes.len());
        for &class in &classes {
            let mut w = Scaled {
                scale: 1.0,
                v: vec![0.0; dim + 1],
            };
            let mut t = 0usize;
            for _ in 0..cfg.passes {
                order.shuffle(&mut rng);
                for &i in &order {
                    t += 1;
                    let eta = 1.0 / (lambda * t as f64);
                    let y = if ys[i] == class { 1.0 } else { -1.0 };
                    let margin = y * w.dot(&xs[i]);
                    w.shrink(1.0 - eta * lambda);
                    if margin < 1.0 {
                        w.add(&xs[i], eta * y);
                    }
                }
            }
            weights.push(w.into_dense());
        }
        debug_assert!(classes.iter().all(|&c| usize::from(c) < NUM_CLASSES));
        Ok(LinearSvm { classes, weights })
    }

    fn score(w: &[f64], x: &SparseVec) -> f64 {
        x.dot_dense(w) + w[w.len() - 1]
    }

    /// Class with the highest one-vs-rest score; ties go to the lower class.
    pub fn predict(&self, x: &SparseVec) -> u8 {
        let mut best = (self.classes[0], Self::score(&self.weights[0], x));
        for (c, w) in self.classes.iter().zip(&self.weights).skip(1) {
            let s = Self::score(w, x);
            if s > best.1 {
                best = (*c, s);
            }
        }
        best.0
    }
}
