use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::NUM_CLASSES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 20,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: u8,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier with Gini impurity. Absent features read as 0 and go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

type Counts = [usize; NUM_CLASSES];

fn gini_mass(c: &Counts, n: usize) -> f64 {
    // n · gini, so weighted sums need no further scaling.
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = c.iter().map(|&k| (k * k) as f64).sum();
    n as f64 - sq / n as f64
}

fn majority(c: &Counts) -> u8 {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if c[k] > c[best] {
            best = k;
        }
    }
    best as u8
}

struct Builder<'a> {
    xs: &'a [SparseVec],
    ys: &'a [u8],
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

struct Best {
    score: f64,
    feature: u32,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> Counts {
        let mut c = [0; NUM_CLASSES];
        for &s in samples {
            c[usize::from(self.ys[s])] += 1;
        }
        c
    }

    fn best_split(&self, samples: &[usize], total: &Counts) -> Option<Best> {
        let n = samples.len();
        let parent = gini_mass(total, n);
        let mut columns: BTreeMap<u32, Vec<(f64, u8)>> = BTreeMap::new();
        for &s in samples {
            for (f, v) in self.xs[s].iter() {
                columns.entry(f).or_default().push((v, self.ys[s]));
            }
        }
        let min_leaf = self.cfg.min_leaf;
        let mut best: Option<Best> = None;
        for (feature, mut entries) in columns {
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = *total;
            for &(_, y) in &entries {
                left[usize::from(y)] -= 1;
            }
            let mut nl = n - entries.len();
            let mut prev = 0.0;
            let mut i = 0;
            while i < entries.len() {
                let v = entries[i].0;
                if nl >= min_leaf && n - nl >= min_leaf && v > prev {
                    let mut right = *total;
                    for k in 0..NUM_CLASSES {
                        right[k] -= left[k];
                    }
                    let score = gini_mass(&left, nl) + gini_mass(&right, n - nl);
                    if score < parent - 1e-12 && best.as_ref().is_none_or(|b| score < b.score) {
                        best = Some(Best {
                            score,
                            feature,
                            threshold: (prev + v) / 2.0,
                        });
                    }
                }
                while i < entries.len() && entries[i].0 == v {
                    left[usize::from(entries[i].1)] += 1;
                    nl += 1;
                    i += 1;
                }
                prev = v;
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&samples);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || samples.len() < 2 * self.cfg.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&samples, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.xs[s].get(split.feature) <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    pub fn fit(xs: &[SparseVec], ys: &[u8], cfg: TreeConfig) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::EmptyInput { op: "decision tree fit" });
        }
        if cfg.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be ≥ 1".into()));
        }
        let mut b = Builder {
            xs,
            ys,
            cfg,
            nodes: Vec::new(),
        };
        b.grow((0..xs.len()).collect(), 0);
        Ok(DecisionTree { nodes: b.nodes })
    }

    pub fn predict(&self, x: &SparseVec) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
}
