//! Recording tape and the differentiable operations used by the model.
//!
//! [`Graph`] evaluates operations eagerly and records them; [`Tape::backward`]
//! then visits the records in exact reverse order and accumulates adjoints
//! into the trainable parameters' gradients.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Value {
    Param(ParamId),
    Owned(Tensor),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Embedding { table: NodeId, ids: Vec<u32> },
    Conv1d { input: NodeId, filters: NodeId, bias: NodeId, pad: usize },
    LeakyRelu { x: NodeId, slope: f64 },
    MaxPoolTime { x: NodeId, argmax: Vec<usize> },
    SliceRows { x: NodeId, rows: Range<usize> },
    MeanRows { x: NodeId },
    Concat { parts: Vec<NodeId> },
    Linear { x: NodeId, w: NodeId, b: NodeId },
    Softmax { x: NodeId },
    CrossEntropy { logits: NodeId, target: usize, probs: Vec<f64> },
    Sum { x: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, factor: f64 },
}

#[derive(Debug)]
struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Recorded operations of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// A forward pass in progress over a frozen parameter store.
pub struct Graph<'p> {
    store: &'p ParamStore,
    tape: Tape,
}

fn value<'a>(nodes: &'a [Node], store: &'a ParamStore, id: NodeId) -> &'a Tensor {
    match &nodes[id.0].value {
        Value::Owned(t) => t,
        Value::Param(p) => &store.get(*p).tensor,
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            tape: Tape::default(),
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn into_tape(self) -> Tape {
        self.tape
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        value(&self.tape.nodes, self.store, id)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.tape.nodes[id.0].requires_grad
    }

    fn push(&mut self, t: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.tape.nodes.push(Node {
            value: Value::Owned(t),
            op,
            requires_grad,
        });
        NodeId(self.tape.nodes.len() - 1)
    }

    pub fn param(&mut self, p: ParamId) -> NodeId {
        let requires_grad = self.store.get(p).trainable;
        self.tape.nodes.push(Node {
            value: Value::Param(p),
            op: Op::Leaf,
            requires_grad,
        });
        NodeId(self.tape.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    /// Gathers rows of a `[V×D]` table.
    pub fn embedding(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(Error::shape("embedding", format!("table must be 2-D, got {:?}", t.shape())));
        }
        if ids.is_empty() {
            return Err(Error::EmptyInput { op: "embedding" });
        }
        let (v, d) = (t.shape()[0], t.shape()[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = id as usize;
            if id >= v {
                return Err(Error::IdOutOfRange { id, vocab: v });
            }
            out.extend_from_slice(t.row(id));
        }
        let out = Tensor::new(vec![ids.len(), d], out)?;
        let rg = self.requires(table);
        Ok(self.push(out, Op::Embedding { table, ids: ids.to_vec() }, rg))
    }

    /// Cross-correlation of `[L×D]` input with `[F×R×D]` filters over the
    /// sequence zero-padded by `pad` rows on both sides. Output `[(L+2·pad−R+1)×F]`.
    pub fn conv1d(&mut self, input: NodeId, filters: NodeId, bias: NodeId, pad: usize) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(filters);
        let b = self.value(bias);
        if x.rank() != 2 || w.rank() != 3 || b.rank() != 1 {
            return Err(Error::shape(
                "conv1d",
                format!("input {:?}, filters {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        }
        let (l, d) = (x.shape()[0], x.shape()[1]);
        let (f, r, wd) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        if wd != d || b.shape()[0] != f {
            return Err(Error::shape(
                "conv1d",
                format!("input {:?}, filters {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        }
        if r > l + 2 * pad {
            return Err(Error::shape("conv1d", format!("region {r} longer than padded length {}", l + 2 * pad)));
        }
        let t_out = l + 2 * pad - r + 1;
        let (xd, wd_, bd) = (x.data(), w.data(), b.data());
        let mut out = vec![0.0; t_out * f];
        for t in 0..t_out {
            let o = &mut out[t * f..(t + 1) * f];
            o.copy_from_slice(bd);
            for k in 0..r {
                let Some(row) = (t + k).checked_sub(pad).filter(|&i| i < l) else {
                    continue;
                };
                let xr = &xd[row * d..(row + 1) * d];
                for (fi, of) in o.iter_mut().enumerate() {
                    let wr = &wd_[(fi * r + k) * d..(fi * r + k + 1) * d];
                    *of += dot(xr, wr);
                }
            }
        }
        let out = Tensor::new(vec![t_out, f], out)?;
        let rg = self.requires(input) || self.requires(filters) || self.requires(bias);
        Ok(self.push(out, Op::Conv1d { input, filters, bias, pad }, rg))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(x);
        self.push(out, Op::LeakyRelu { x, slope }, rg)
    }

    /// Column-wise maximum of `[T×F]`; ties resolve to the lowest row.
    pub fn max_pool_time(&mut self, x: NodeId) -> Result<NodeId> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::shape("max_pool_time", format!("expected 2-D, got {:?}", t.shape())));
        }
        let (rows, f) = (t.shape()[0], t.shape()[1]);
        let mut best = t.row(0).to_vec();
        let mut argmax = vec![0; f];
        for r in 1..rows {
            for (j, &v) in t.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r;
                }
            }
        }
        let rg = self.requires(x);
        Ok(self.push(Tensor::vector(best), Op::MaxPoolTime { x, argmax }, rg))
    }

    pub fn slice_rows(&mut self, x: NodeId, rows: Range<usize>) -> Result<NodeId> {
        let t = self.value(x);
        if t.rank() != 2 || rows.end > t.shape()[0] || rows.is_empty() {
            return Err(Error::shape(
                "slice_rows",
                format!("rows {rows:?} of {:?}", t.shape()),
            ));
        }
        let d = t.shape()[1];
        let data = t.data()[rows.start * d..rows.end * d].to_vec();
        let out = Tensor::new(vec![rows.len(), d], data)?;
        let rg = self.requires(x);
        Ok(self.push(out, Op::SliceRows { x, rows }, rg))
    }

    /// Mean over the rows of `[K×D]`.
    pub fn mean_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::shape("mean_rows", format!("expected 2-D, got {:?}", t.shape())));
        }
        let (k, d) = (t.shape()[0], t.shape()[1]);
        if k == 0 {
            return Err(Error::EmptyInput { op: "mean_rows" });
        }
        let mut out = vec![0.0; d];
        for r in 0..k {
            for (o, v) in out.iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= k as f64);
        let rg = self.requires(x);
        Ok(self.push(Tensor::vector(out), Op::MeanRows { x }, rg))
    }

    /// Concatenates the flattened values of `parts`.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput { op: "concat" });
        }
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(Tensor::vector(out), Op::Concat { parts: parts.to_vec() }, rg))
    }

    /// `W·x + b` with `x: [N]`, `W: [M×N]`, `b: [M]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.rank() != 2 || bv.rank() != 1 || wv.shape()[1] != xv.len() || wv.shape()[0] != bv.len() {
            return Err(Error::shape(
                "linear",
                format!("x {:?}, W {:?}, b {:?}", xv.shape(), wv.shape(), bv.shape()),
            ));
        }
        let m = wv.shape()[0];
        let out: Vec<f64> = (0..m).map(|i| bv.data()[i] + dot(wv.row(i), xv.data())).collect();
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        Ok(self.push(Tensor::vector(out), Op::Linear { x, w, b }, rg))
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let p = softmax(self.value(x).data())?;
        let rg = self.requires(x);
        Ok(self.push(Tensor::vector(p), Op::Softmax { x }, rg))
    }

    /// `−log softmax(logits)[target]`, fused.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let z = self.value(logits).data();
        if target >= z.len() {
            return Err(Error::TargetOutOfRange {
                target,
                classes: z.len(),
            });
        }
        let (lse, probs) = log_sum_exp(z)?;
        let loss = lse - z[target];
        let rg = self.requires(logits);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target, probs }, rg))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        let rg = self.requires(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape("mul", format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(out, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(x);
        self.push(out, Op::Scale { x, factor }, rg)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(z: &[f64]) -> Result<(f64, Vec<f64>)> {
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::NonFinite("softmax input"));
    }
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    Ok((m + s.ln(), exps.into_iter().map(|e| e / s).collect()))
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    log_sum_exp(z).map(|(_, p)| p)
}

impl Tape {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value<'a>(&'a self, id: NodeId, store: &'a ParamStore) -> &'a Tensor {
        value(&self.nodes, store, id)
    }

    /// Hash of every branch decision taken in the forward pass: pooling
    /// winners and activation sides. Two passes with equal fingerprints
    /// evaluate the same smooth piece of the function.
    pub fn fingerprint(&self, store: &ParamStore) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::MaxPoolTime { argmax, .. } => argmax.hash(&mut h),
                Op::LeakyRelu { x, .. } => {
                    for v in value(&self.nodes, store, *x).data() {
                        (*v >= 0.0).hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Accumulates `∂loss/∂θ` into every trainable parameter's gradient.
    /// Gradients are added to whatever is already there.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        let root = &self.nodes[loss.0];
        if !root.requires_grad {
            return Err(Error::DetachedNode);
        }
        let root_len = match &root.value {
            Value::Owned(t) => t.len(),
            Value::Param(p) => store.get(*p).tensor.len(),
        };
        if root_len != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, has {root_len} values")));
        }

        let mut adj: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let nodes = &self.nodes;
            match &nodes[id].op {
                Op::Leaf => {
                    if let Value::Param(p) = nodes[id].value {
                        let param = store.get_mut(p);
                        if param.trainable {
                            add_into(param.gradient.data_mut(), &g);
                        }
                    }
                }
                Op::Embedding { table, ids } => {
                    let d = value(nodes, store, *table).shape()[1];
                    accumulate(nodes, &mut adj, store, *table, |dst| {
                        for (i, &id) in ids.iter().enumerate() {
                            let row = &mut dst[id as usize * d..(id as usize + 1) * d];
                            add_into(row, &g[i * d..(i + 1) * d]);
                        }
                    });
                }
                Op::Conv1d { input, filters, bias, pad } => {
                    let x = value(nodes, store, *input);
                    let w = value(nodes, store, *filters);
                    let (l, d) = (x.shape()[0], x.shape()[1]);
                    let (f, r) = (w.shape()[0], w.shape()[1]);
                    let t_out = g.len() / f;
                    let (xd, wd) = (x.data(), w.data());

                    let mut dx = vec![0.0; l * d];
                    let mut dw = vec![0.0; f * r * d];
                    let mut db = vec![0.0; f];
                    for t in 0..t_out {
                        let gt = &g[t * f..(t + 1) * f];
                        add_into(&mut db, gt);
                        for k in 0..r {
                            let Some(row) = (t + k).checked_sub(*pad).filter(|&i| i < l) else {
                                continue;
                            };
                            let xr = &xd[row * d..(row + 1) * d];
                            for (fi, &gv) in gt.iter().enumerate() {
                                if gv == 0.0 {
                                    continue;
                                }
                                let off = (fi * r + k) * d;
                                axpy(&mut dx[row * d..(row + 1) * d], gv, &wd[off..off + d]);
                                axpy(&mut dw[off..off + d], gv, xr);
                            }
                        }
                    }
                    accumulate(nodes, &mut adj, store, *input, |dst| add_into(dst, &dx));
                    accumulate(nodes, &mut adj, store, *filters, |dst| add_into(dst, &dw));
                    accumulate(nodes, &mut adj, store, *bias, |dst| add_into(dst, &db));
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = value(nodes, store, *x).data();
                    let local: Vec<f64> = xv
                        .iter()
                        .zip(&g)
                        .map(|(&v, &gv)| if v >= 0.0 { gv } else { slope * gv })
                        .collect();
                    accumulate(nodes, &mut adj, store, *x, |dst| add_into(dst, &local));
                }
                Op::MaxPoolTime { x, argmax } => {
                    let f = argmax.len();
                    accumulate(nodes, &mut adj, store, *x, |dst| {
                        for (j, &r) in argmax.iter().enumerate() {
                            dst[r * f + j] += g[j];
                        }
                    });
                }
                Op::SliceRows { x, rows } => {
                    let d = g.len() / rows.len();
                    let start = rows.start * d;
                    accumulate(nodes, &mut adj, store, *x, |dst| {
                        add_into(&mut dst[start..start + g.len()], &g)
                    });
                }
                Op::MeanRows { x } => {
                    let k = value(nodes, store, *x).shape()[0];
                    let inv = 1.0 / k as f64;
                    accumulate(nodes, &mut adj, store, *x, |dst| {
                        for chunk in dst.chunks_mut(g.len()) {
                            axpy(chunk, inv, &g);
                        }
                    });
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for &p in parts {
                        let n = value(nodes, store, p).len();
                        let piece = &g[off..off + n];
                        accumulate(nodes, &mut adj, store, p, |dst| add_into(dst, piece));
                        off += n;
                    }
                }
                Op::Linear { x, w, b } => {
                    let xv = value(nodes, store, *x).data();
                    let wv = value(nodes, store, *w);
                    let n = xv.len();
                    let mut dx = vec![0.0; n];
                    let mut dw = vec![0.0; g.len() * n];
                    for (i, &gi) in g.iter().enumerate() {
                        axpy(&mut dx, gi, wv.row(i));
                        axpy(&mut dw[i * n..(i + 1) * n], gi, xv);
                    }
                    accumulate(nodes, &mut adj, store, *x, |dst| add_into(dst, &dx));
                    accumulate(nodes, &mut adj, store, *w, |dst| add_into(dst, &dw));
                    accumulate(nodes, &mut adj, store, *b, |dst| add_into(dst, &g));
                }
                Op::Softmax { x } => {
                    let Value::Owned(p) = &nodes[id].value else { unreachable!() };
                    let p = p.data();
                    let s = dot(p, &g);
                    let local: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi * (gi - s)).collect();
                    accumulate(nodes, &mut adj, store, *x, |dst| add_into(dst, &local));
                }
                Op::CrossEntropy { logits, target, probs } => {
                    let mut local: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    local[*target] -= g[0];
                    accumulate(nodes, &mut adj, store, *logits, |dst| add_into(dst, &local));
                }
                Op::Sum { x } => {
                    accumulate(nodes, &mut adj, store, *x, |dst| dst.iter_mut().for_each(|v| *v += g[0]));
                }
                Op::Mul { a, b } => {
                    let av = value(nodes, store, *a).data();
                    let bv = value(nodes, store, *b).data();
                    let da: Vec<f64> = bv.iter().zip(&g).map(|(x, y)| x * y).collect();
                    let db: Vec<f64> = av.iter().zip(&g).map(|(x, y)| x * y).collect();
                    accumulate(nodes, &mut adj, store, *a, |dst| add_into(dst, &da));
                    accumulate(nodes, &mut adj, store, *b, |dst| add_into(dst, &db));
                }
                Op::Scale { x, factor } => {
                    accumulate(nodes, &mut adj, store, *x, |dst| axpy(dst, *factor, &g));
                }
            }
        }
        Ok(())
    }
}

/// Routes a contribution to `target`: straight into the parameter gradient
/// for trainable leaves, into the adjoint buffer for intermediate nodes.
fn accumulate(
    nodes: &[Node],
    adj: &mut [Option<Vec<f64>>],
    store: &mut ParamStore,
    target: NodeId,
    f: impl FnOnce(&mut [f64]),
) {
    let node = &nodes[target.0];
    if !node.requires_grad {
        return;
    }
    match &node.value {
        Value::Param(p) if matches!(node.op, Op::Leaf) => f(store.get_mut(*p).gradient.data_mut()),
        Value::Param(_) => unreachable!("parameters are leaves"),
        Value::Owned(t) => f(adj[target.0].get_or_insert_with(|| vec![0.0; t.len()])),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(t: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("p", t);
        (s, id)
    }

    #[test]
    fn embedding_gathers_rows() {
        let (s, table) = store_with(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let mut g = Graph::new(&s);
        let t = g.param(table);
        let e = g.embedding(t, &[0, 1]).unwrap();
        assert_eq!(g.value(e).data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(g.embedding(t, &[2]), Err(Error::IdOutOfRange { id: 2, vocab: 2 })));
    }

    #[test]
    fn embedding_backward_accumulates_repeated_rows() {
        let (mut s, table) = store_with(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let mut g = Graph::new(&s);
        let t = g.param(table);
        let e = g.embedding(t, &[1, 1]).unwrap();
        let loss = g.sum(e);
        let tape = g.into_tape();
        tape.backward(loss, &mut s).unwrap();
        assert_eq!(s.get(table).gradient.data(), &[0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn conv1d_window_sums() {
        let (a, b, c) = (0.5, -1.25, 2.0);
        let mut s = ParamStore::new();
        let w = s.add("w", Tensor::new(vec![1, 2, 1], vec![1.0, 1.0]).unwrap());
        let bias = s.add("b", Tensor::vector(vec![0.0]));
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::new(vec![3, 1], vec![a, b, c]).unwrap());
        let (wn, bn) = (g.param(w), g.param(bias));
        let y = g.conv1d(x, wn, bn, 1).unwrap();
        assert_eq!(g.value(y).data(), &[a, a + b, b + c, c]);
    }

    #[test]
    fn conv1d_output_length() {
        let mut s = ParamStore::new();
        let w = s.add("w", Tensor::zeros(&[2, 8, 3]));
        let bias = s.add("b", Tensor::zeros(&[2]));
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::zeros(&[512, 3]));
        let (wn, bn) = (g.param(w), g.param(bias));
        let y = g.conv1d(x, wn, bn, 1).unwrap();
        assert_eq!(g.value(y).shape(), &[507, 2]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn leaky_relu_values() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::vector(vec![2.0, -1.0, 0.0]));
        let y = g.leaky_relu(x, 0.01);
        assert_eq!(g.value(y).data(), &[2.0, -0.01, 0.0]);
    }

    #[test]
    fn max_pool_tie_goes_to_first_row() {
        let (mut s, p) = store_with(Tensor::new(vec![2, 1], vec![2.0, 2.0]).unwrap());
        let mut g = Graph::new(&s);
        let x = g.param(p);
        let m = g.max_pool_time(x).unwrap();
        assert_eq!(g.value(m).data(), &[2.0]);
        let loss = g.sum(m);
        g.into_tape().backward(loss, &mut s).unwrap();
        assert_eq!(s.get(p).gradient.data(), &[1.0, 0.0]);
    }

    #[test]
    fn max_pool_picks_column_max() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::new(vec![3, 1], vec![1.0, 3.0, 2.0]).unwrap());
        let m = g.max_pool_time(x).unwrap();
        assert_eq!(g.value(m).data(), &[3.0]);
    }

    #[test]
    fn mean_rows_examples() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let one = g.constant(Tensor::from_rows(&[vec![2.0, 4.0]]).unwrap());
        let m = g.mean_rows(one).unwrap();
        assert_eq!(g.value(m).data(), &[2.0, 4.0]);
        let two = g.constant(Tensor::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap());
        let m = g.mean_rows(two).unwrap();
        assert_eq!(g.value(m).data(), &[2.0, 2.0]);
        assert!(g.slice_rows(two, 1..1).is_err());
    }

    #[test]
    fn linear_examples() {
        let mut s = ParamStore::new();
        let w = s.add("w", Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap());
        let b = s.add("b", Tensor::vector(vec![1.0]));
        let w0 = s.add("w0", Tensor::zeros(&[2, 2]));
        let b0 = s.add("b0", Tensor::vector(vec![0.5, -0.5]));
        let wi = s.add("wi", Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let zero = s.add("z", Tensor::zeros(&[2]));
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::vector(vec![2.0, 3.0]));
        let (wn, bn) = (g.param(w), g.param(b));
        let y = g.linear(x, wn, bn).unwrap();
        assert_eq!(g.value(y).data(), &[6.0]);
        let (wn, bn) = (g.param(w0), g.param(b0));
        let y = g.linear(x, wn, bn).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -0.5]);
        let (wn, bn) = (g.param(wi), g.param(zero));
        let y = g.linear(x, wn, bn).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 3.0]);
        let (wn, bn) = (g.param(w), g.param(zero));
        assert!(g.linear(x, wn, bn).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0; 4]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let c = 0.7;
        let p = softmax(&[c, c + 2f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(softmax(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let z = g.constant(Tensor::vector(vec![0.0; 4]));
        let l = g.cross_entropy(z, 2).unwrap();
        assert!((g.value(l).data()[0] - 4f64.ln()).abs() < 1e-15);
        let z = g.constant(Tensor::vector(vec![0.0, 0.0, 60.0, 0.0]));
        let l = g.cross_entropy(z, 2).unwrap();
        assert!(g.value(l).data()[0] < 1e-20);
        assert!(matches!(g.cross_entropy(z, 4), Err(Error::TargetOutOfRange { .. })));
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_one_hot() {
        let (mut s, p) = store_with(Tensor::vector(vec![0.3, -1.2, 2.0, 0.1]));
        let mut g = Graph::new(&s);
        let z = g.param(p);
        let l = g.cross_entropy(z, 1).unwrap();
        g.into_tape().backward(l, &mut s).unwrap();
        let mut expect = softmax(s.get(p).tensor.data()).unwrap();
        expect[1] -= 1.0;
        for (a, b) in s.get(p).gradient.data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sum_and_square_gradients() {
        let (mut s, p) = store_with(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let mut g = Graph::new(&s);
        let x = g.param(p);
        let l = g.sum(x);
        g.into_tape().backward(l, &mut s).unwrap();
        assert_eq!(s.get(p).gradient.data(), &[1.0, 1.0, 1.0]);

        let (mut s, p) = store_with(Tensor::scalar(3.0));
        let mut g = Graph::new(&s);
        let x = g.param(p);
        let sq = g.mul(x, x).unwrap();
        let tape = g.into_tape();
        tape.backward(sq, &mut s).unwrap();
        assert_eq!(s.get(p).gradient.data(), &[6.0]);
        // A second backward without zeroing accumulates.
        tape.backward(sq, &mut s).unwrap();
        assert_eq!(s.get(p).gradient.data(), &[12.0]);
    }

    #[test]
    fn backward_on_constant_graph_fails() {
        let mut s = ParamStore::new();
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::scalar(1.0));
        let l = g.sum(x);
        assert!(matches!(g.into_tape().backward(l, &mut s), Err(Error::DetachedNode)));
    }

    #[test]
    fn frozen_parameters_get_no_gradient() {
        let (mut s, p) = store_with(Tensor::vector(vec![1.0, 2.0]));
        let q = s.add("q", Tensor::vector(vec![1.0, 1.0]));
        s.get_mut(p).trainable = false;
        let mut g = Graph::new(&s);
        let (a, b) = (g.param(p), g.param(q));
        let m = g.mul(a, b).unwrap();
        let l = g.sum(m);
        g.into_tape().backward(l, &mut s).unwrap();
        assert_eq!(s.get(p).gradient.data(), &[0.0, 0.0]);
        assert_eq!(s.get(q).gradient.data(), &[1.0, 2.0]);
    }
}
