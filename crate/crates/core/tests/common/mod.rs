//! Straight-line reference implementations shared by the integration tests.
//! Each one is written from the definition, without reusing library code.

#![allow(dead_code)]

use std::path::PathBuf;

use jokemeter::corpus::HeadlineEdit;
use jokemeter::tensor::{Graph, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-2.0..2.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Naive 1-D cross-correlation: x `[L][D]`, w `[F][R][D]`, zero padding.
pub fn conv_naive(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], b: &[f64], pad: usize) -> Vec<Vec<f64>> {
    let l = x.len() as isize;
    let r = w[0].len() as isize;
    let t_out = l + 2 * pad as isize - r + 1;
    let mut out = Vec::new();
    for t in 0..t_out {
        let mut row = Vec::new();
        for (f, wf) in w.iter().enumerate() {
            let mut s = b[f];
            for k in 0..r {
                let i = t + k - pad as isize;
                if i < 0 || i >= l {
                    continue;
                }
                for (d, xv) in x[i as usize].iter().enumerate() {
                    s += xv * wf[k as usize][d];
                }
            }
            row.push(s);
        }
        out.push(row);
    }
    out
}

/// Gradients of `Σ c[t][f]·conv[t][f]` w.r.t. x, w and b.
pub fn conv_naive_grads(
    x: &[Vec<f64>],
    w: &[Vec<Vec<f64>>],
    pad: usize,
    c: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, Vec<f64>) {
    let l = x.len() as isize;
    let d = x[0].len();
    let mut gx = vec![vec![0.0; d]; x.len()];
    let mut gw = vec![vec![vec![0.0; d]; w[0].len()]; w.len()];
    let mut gb = vec![0.0; w.len()];
    for (t, ct) in c.iter().enumerate() {
        for (f, &cf) in ct.iter().enumerate() {
            gb[f] += cf;
            for k in 0..w[0].len() {
                let i = t as isize + k as isize - pad as isize;
                if i < 0 || i >= l {
                    continue;
                }
                for j in 0..d {
                    gw[f][k][j] += cf * x[i as usize][j];
                    gx[i as usize][j] += cf * w[f][k][j];
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Column maxima and the first row attaining each.
pub fn max_pool_naive(x: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let f = x[0].len();
    let mut vals = Vec::new();
    let mut idx = Vec::new();
    for j in 0..f {
        let mut bi = 0;
        for i in 1..x.len() {
            if x[i][j] > x[bi][j] {
                bi = i;
            }
        }
        vals.push(x[bi][j]);
        idx.push(bi);
    }
    (vals, idx)
}

pub fn softmax_naive(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn cross_entropy_naive(z: &[f64], target: usize) -> f64 {
    -softmax_naive(z)[target].ln()
}

pub fn flat2(x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().flatten().copied().collect()
}

pub fn flat3(x: &[Vec<Vec<f64>>]) -> Vec<f64> {
    x.iter().flatten().flatten().copied().collect()
}

/// Forward value and parameter gradients of `Σ c ⊙ op(params)` on the tape.
pub struct TapeRun {
    pub value: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

pub fn tape_run(
    tensors: Vec<Tensor>,
    weights: Option<Tensor>,
    build: impl Fn(&mut Graph<'_>, &[jokemeter::tensor::NodeId]) -> jokemeter::tensor::NodeId,
) -> TapeRun {
    let mut store = ParamStore::new();
    let ids: Vec<_> = tensors
        .into_iter()
        .enumerate()
        .map(|(i, t)| store.add(format!("p{i}"), t))
        .collect();
    let (tape, out, loss, value) = {
        let mut g = Graph::new(&store);
        let nodes: Vec<_> = ids.iter().map(|&p| g.param(p)).collect();
        let out = build(&mut g, &nodes);
        let value = g.value(out).data().to_vec();
        let loss = match &weights {
            Some(c) => {
                let cn = g.constant(c.clone());
                let m = g.mul(out, cn).expect("same shape");
                g.sum(m)
            }
            None => g.sum(out),
        };
        (g.into_tape(), out, loss, value)
    };
    let _ = out;
    tape.backward(loss, &mut store).expect("backward");
    TapeRun {
        value,
        grads: ids.iter().map(|&p| store.get(p).gradient.data().to_vec()).collect(),
    }
}

/// Straight-line early stopping: returns (epochs run, best epoch, stopped by patience).
pub fn early_stop_reference(devs: &[f64], patience: usize) -> (usize, usize, bool) {
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut bad = 0;
    for (i, &d) in devs.iter().enumerate() {
        let epoch = i + 1;
        if d < best {
            best = d;
            best_epoch = epoch;
            bad = 0;
        } else {
            bad += 1;
            if bad == patience {
                return (epoch, best_epoch, true);
            }
        }
    }
    (devs.len(), best_epoch, false)
}

/// Rank-difference Spearman for data without ties.
pub fn spearman_rank_difference(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| 1.0 + v.iter().filter(|b| *b < a).count() as f64)
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Brute-force oracle RMSE written per sample.
pub fn oracle_rmse_reference(ds: &[HeadlineEdit], position: usize) -> f64 {
    let mut acc = 0.0;
    for h in ds {
        let e = h.grades[position - 1] as f64 - h.mean_grade;
        acc += e * e;
    }
    (acc / ds.len() as f64).sqrt()
}

pub fn constant_rmse_reference(ds: &[HeadlineEdit], g: u8) -> f64 {
    let mut acc = 0.0;
    for h in ds {
        let e = g as f64 - h.mean_grade;
        acc += e * e;
    }
    (acc / ds.len() as f64).sqrt()
}

/// Random valid records with descending grades and a mean over 5–7 grades.
pub fn random_records(r: &mut ChaCha8Rng, n: usize) -> Vec<HeadlineEdit> {
    (0..n)
        .map(|i| {
            let k = r.random_range(5..=7);
            let mut g: Vec<u8> = (0..k).map(|_| r.random_range(0..=3)).collect();
            g.sort_unstable_by(|a, b| b.cmp(a));
            let mean = g.iter().map(|&v| v as f64).sum::<f64>() / k as f64;
            HeadlineEdit::new(i.to_string(), "a <b/> c", "d", &g, mean).unwrap()
        })
        .collect()
}

/// Values frozen from an independent Python computation over
/// `data/mini/task1_train.csv`.
pub mod mini_golden {
    pub const ORACLE: [f64; 5] = [
        0.9183318209303941,
        0.5259911279353168,
        0.2449489742783178,
        0.3559026084010437,
        0.7810249675906654,
    ];
    pub const CONSTANT: [f64; 4] = [1.480990659434871, 0.8906926143924925, 1.1803954139750517, 1.9983326383095816];
    pub const HISTOGRAM: [usize; 11] = [2, 1, 2, 1, 3, 0, 1, 0, 1, 0, 1];
    pub const COUNTS: [[usize; 4]; 5] = [[1, 3, 4, 4], [2, 3, 5, 2], [3, 6, 1, 2], [4, 5, 2, 1], [8, 2, 1, 1]];
    pub const ANY: [usize; 4] = [18, 19, 13, 10];
    pub const MEAN: f64 = 1.2;
}
