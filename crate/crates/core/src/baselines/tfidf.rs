use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_map(m: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = m.into_iter().unzip();
        SparseVec { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        self.indices
            .binary_search(&index)
            .map_or(0.0, |k| self.values[k])
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, v)| w[i as usize] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Smoothed TF-IDF: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, raw counts as
/// term frequency, L2-normalized output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    terms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    df: Vec<usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in docs {
            let mut words = tokenize(d.as_ref());
            words.sort_unstable();
            words.dedup();
            for w in words {
                *df.entry(w).or_default() += 1;
            }
        }
        let n = docs.len();
        let (terms, df): (Vec<String>, Vec<usize>) = df.into_iter().unzip();
        let idf = df
            .iter()
            .map(|&d| ((1 + n) as f64 / (1 + d) as f64).ln() + 1.0)
            .collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(TfidfModel {
            terms,
            index,
            df,
            idf,
            n_docs: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn term_index(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.term_index(term).map(|i| self.df[i as usize])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i as usize])
    }

    /// Raw counts of known terms.
    pub fn counts(&self, s: &str) -> SparseVec {
        let mut m = BTreeMap::new();
        for w in tokenize(s) {
            if let Some(&i) = self.index.get(&w) {
                *m.entry(i).or_insert(0.0) += 1.0;
            }
        }
        SparseVec::from_map(m)
    }

    /// L2-normalized TF-IDF vector; the zero vector when no term is known.
    pub fn transform(&self, s: &str) -> SparseVec {
        let mut v = self.counts(s);
        for (i, x) in v.indices.iter().zip(v.values.iter_mut()) {
            *x *= self.idf[*i as usize];
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}
