use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::NUM_CLASSES;
use crate::error::{Error, Result};

/// Multinomial naive Bayes with Laplace smoothing over raw term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    classes: Vec<u8>,
    log_prior: Vec<f64>,
    log_likelihood: Vec<Vec<f64>>,
}

impl MultinomialNb {
    pub fn fit(counts: &[SparseVec], ys: &[u8], dim: usize, alpha: f64) -> Result<Self> {
        if counts.is_empty() || counts.len() != ys.len() {
            return Err(Error::EmptyInput { op: "naive Bayes fit" });
        }
        if !(alpha > 0.0) {
            return Err(Error::Config("naive Bayes alpha must be positive".into()));
        }
        let mut docs = [0usize; NUM_CLASSES];
        let mut term = vec![vec![0.0; dim]; NUM_CLASSES];
        for (x, &y) in counts.iter().zip(ys) {
            let c = usize::from(y);
            docs[c] += 1;
            for (t, v) in x.iter() {
                term[c][t as usize] += v;
            }
        }
        let n = counts.len() as f64;
        let mut out = MultinomialNb {
            classes: Vec::new(),
            log_prior: Vec::new(),
            log_likelihood: Vec::new(),
        };
        for c in 0..NUM_CLASSES {
            if docs[c] == 0 {
                continue;
            }
            let total: f64 = term[c].iter().sum::<f64>() + alpha * dim as f64;
            out.classes.push(c as u8);
            out.log_prior.push((docs[c] as f64 / n).ln());
            out.log_likelihood
                .push(term[c].iter().map(|&k| ((k + alpha) / total).ln()).collect());
        }
        Ok(out)
    }

    /// Maximum posterior class; ties go to the lower class.
    pub fn predict(&self, counts: &SparseVec) -> u8 {
        let mut best = (self.classes[0], f64::NEG_INFINITY);
        for (k, &c) in self.classes.iter().enumerate() {
            let s = self.log_prior[k] + counts.dot_dense(&self.log_likelihood[k]);
            if s > best.1 {
                best = (c, s);
            }
        }
        best.0
    }
}
