use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::NUM_CLASSES;
use crate::error::{Error, Result};

/// Cosine-distance k-NN over L2-normalized vectors, searched through an
/// inverted index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    labels: Vec<u8>,
    postings: Vec<Vec<(u32, f64)>>,
}

impl Knn {
    pub fn fit(xs: &[SparseVec], ys: &[u8], dim: usize) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::EmptyInput { op: "knn fit" });
        }
        let mut postings = vec![Vec::new(); dim];
        for (doc, x) in xs.iter().enumerate() {
            for (t, v) in x.iter() {
                postings[t as usize].push((doc as u32, v));
            }
        }
        Ok(Knn {
            labels: ys.to_vec(),
            postings,
        })
    }

    /// Indices of the `k` most similar training points, nearest first.
    /// Equal similarities are ordered by training index.
    pub fn neighbors(&self, x: &SparseVec, k: usize) -> Vec<usize> {
        let mut sims = vec![0.0; self.labels.len()];
        for (t, v) in x.iter() {
            if let Some(list) = self.postings.get(t as usize) {
                for &(doc, w) in list {
                    sims[doc as usize] += v * w;
                }
            }
        }
        let cmp = |a: &usize, b: &usize| sims[*b].total_cmp(&sims[*a]).then(a.cmp(b));
        let mut idx: Vec<usize> = (0..sims.len()).collect();
        let k = k.clamp(1, idx.len());
        if k < idx.len() {
            idx.select_nth_unstable_by(k - 1, cmp);
            idx.truncate(k);
        }
        idx.sort_by(cmp);
        idx
    }

    /// Majority vote; a tied vote goes to the tied class whose member ranks
    /// nearest.
    pub fn predict(&self, x: &SparseVec, k: usize) -> u8 {
        let nn = self.neighbors(x, k);
        let mut votes = [0usize; NUM_CLASSES];
        for &i in &nn {
            votes[usize::from(self.labels[i])] += 1;
        }
        let top = *votes.iter().max().unwrap_or(&0);
        nn.iter()
            .map(|&i| self.labels[i])
            .find(|&c| votes[usize::from(c)] == top)
            .unwrap_or(0)
    }
}
