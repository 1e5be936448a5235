//! The JokeMeter text CNN.
//!
//! ```text
//! tokens ─► embedding [L×D] ─┬─► conv(R=2,3,4,8; F each) ─► LeakyReLU ─► max over time ─┐
//!                            └─► mean of edit-token rows ─────────────────────────────────┴─► concat ─► linear ─► softmax
//! ```
//!
//! The softmax over the four grades is read out as an expected grade in
//! `[0, 3]`; Task 2 compares the expected grades of both edits.

mod checkpoint;

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::corpus::{EditPair, HeadlineEdit, PairLabel};
use crate::error::{Error, Result};
use crate::tensor::{
    all_coords, grad_check, init, row_coords, GradCheckConfig, GradCheckReport, Graph, NodeId, ParamId, ParamStore, Tape,
    Tensor,
};
use crate::textprep::{encode_headline, TokenSequence, Vocab, DEFAULT_SEQ_LEN, DEFAULT_VOCAB_CAP};

pub const NUM_GRADES: usize = 4;
/// Standard deviation of the embedding initializer.
pub const EMBEDDING_INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub vocab_size: usize,
    pub region_sizes: Vec<usize>,
    pub filters_per_region: usize,
    pub leaky_slope: f64,
    pub seq_len: usize,
    /// Zero rows added on each side of the sequence before convolution.
    pub conv_padding: usize,
    pub use_edit_embedding: bool,
    /// Off only for the "edit embedding only" ablation.
    pub use_conv_features: bool,
    pub num_grades: usize,
    pub lowercase: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 128,
            vocab_size: DEFAULT_VOCAB_CAP,
            region_sizes: vec![2, 3, 4, 8],
            filters_per_region: 2,
            leaky_slope: 0.01,
            seq_len: DEFAULT_SEQ_LEN,
            conv_padding: 1,
            use_edit_embedding: true,
            use_conv_features: true,
            num_grades: NUM_GRADES,
            lowercase: true,
        }
    }
}

impl ModelConfig {
    pub fn jokemeter() -> Self {
        Self::default()
    }

    /// 2048 filters per region, 2048-d embeddings, no edit embedding.
    pub fn boosted() -> Self {
        ModelConfig {
            embedding_dim: 2048,
            filters_per_region: 2048,
            use_edit_embedding: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embedding_dim == 0 || self.vocab_size == 0 || self.seq_len == 0 || self.num_grades == 0 {
            return bad("all dimensions must be positive".into());
        }
        if !self.use_conv_features && !self.use_edit_embedding {
            return bad("at least one of conv features and edit embedding must be enabled".into());
        }
        if self.use_conv_features {
            if self.region_sizes.is_empty() || self.filters_per_region == 0 {
                return bad("conv features need region sizes and filters".into());
            }
            let mut sorted = self.region_sizes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != self.region_sizes.len() {
                return bad(format!("region sizes must be distinct: {:?}", self.region_sizes));
            }
            if sorted[0] < 2 {
                return bad("region sizes must be at least 2".into());
            }
            if *sorted.last().unwrap() > self.seq_len + 2 * self.conv_padding {
                return bad("region size exceeds the padded sequence".into());
            }
        }
        if !(self.leaky_slope.is_finite()) {
            return bad("leaky slope must be finite".into());
        }
        Ok(())
    }

    pub fn num_conv_features(&self) -> usize {
        if self.use_conv_features {
            self.region_sizes.len() * self.filters_per_region
        } else {
            0
        }
    }

    /// Width of the vector fed to the output layer.
    pub fn feature_width(&self) -> usize {
        self.num_conv_features() + if self.use_edit_embedding { self.embedding_dim } else { 0 }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Probabilities of grades `0..num_grades`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradeDistribution {
    pub probs: Vec<f64>,
}

impl GradeDistribution {
    pub fn expected_grade(&self) -> f64 {
        expected_grade(&self.probs)
    }
}

/// `Σ i·pᵢ`, clamped to `[0, len−1]` against rounding in the last ulp.
pub fn expected_grade(probs: &[f64]) -> f64 {
    let top = probs.len().saturating_sub(1) as f64;
    let e: f64 = probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    e.clamp(0.0, top)
}

/// Max-pooled conv features, ordered by region size then filter index.
pub type PooledFeatures = Vec<f64>;

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub distribution: GradeDistribution,
    pub features: PooledFeatures,
}

/// Task 2 decision from two expected grades; ties go to the first edit.
pub fn decide_pair(first: f64, second: f64) -> PairLabel {
    if second > first {
        PairLabel::Second
    } else {
        PairLabel::First
    }
}

/// How much of the padded sequence the convolutions see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthPolicy {
    /// All `seq_len` positions.
    Full,
    /// Real tokens plus enough trailing PAD rows to reproduce every distinct
    /// window. Runs of all-PAD windows are identical, and max pooling picks the
    /// first of them either way, so values and gradients match `Full`.
    Effective,
}

#[derive(Debug, Clone)]
struct Layout {
    embedding: ParamId,
    convs: Vec<(ParamId, ParamId)>,
    out_w: ParamId,
    out_b: ParamId,
}

/// Architecture without weights.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: ModelConfig,
    layout: Layout,
}

pub(crate) struct Built {
    pub logits: NodeId,
    pub pooled: Vec<NodeId>,
}

impl Network {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn effective_len(&self, seq: &TokenSequence, policy: LengthPolicy) -> usize {
        match policy {
            LengthPolicy::Full => seq.len(),
            LengthPolicy::Effective => {
                let widest = self.cfg.region_sizes.iter().copied().max().unwrap_or(0);
                let need = if self.cfg.use_conv_features {
                    seq.real_length + widest
                } else {
                    seq.edit_span.end
                };
                need.clamp(1, seq.len())
            }
        }
    }

    pub(crate) fn build(&self, g: &mut Graph<'_>, seq: &TokenSequence, policy: LengthPolicy) -> Result<Built> {
        let cfg = &self.cfg;
        if seq.len() != cfg.seq_len {
            return Err(Error::shape(
                "forward",
                format!("sequence length {} but model expects {}", seq.len(), cfg.seq_len),
            ));
        }
        let len = self.effective_len(seq, policy);
        let table = g.param(self.layout.embedding);
        let emb = g.embedding(table, &seq.ids[..len])?;

        let mut parts = Vec::new();
        let mut pooled = Vec::new();
        if cfg.use_conv_features {
            for &(w, b) in &self.layout.convs {
                let (wn, bn) = (g.param(w), g.param(b));
                let conv = g.conv1d(emb, wn, bn, cfg.conv_padding)?;
                let act = g.leaky_relu(conv, cfg.leaky_slope);
                let pool = g.max_pool_time(act)?;
                pooled.push(pool);
                parts.push(pool);
            }
        }
        if cfg.use_edit_embedding {
            let span = check_span(seq, len)?;
            let rows = g.slice_rows(emb, span)?;
            parts.push(g.mean_rows(rows)?);
        }
        let features = g.concat(&parts)?;
        let (w, b) = (g.param(self.layout.out_w), g.param(self.layout.out_b));
        let logits = g.linear(features, w, b)?;
        Ok(Built { logits, pooled })
    }

    pub fn forward_with(&self, store: &ParamStore, seq: &TokenSequence, policy: LengthPolicy) -> Result<ForwardOutput> {
        let mut g = Graph::new(store);
        let built = self.build(&mut g, seq, policy)?;
        let probs = g.softmax(built.logits)?;
        let features = built
            .pooled
            .iter()
            .flat_map(|&p| g.value(p).data().to_vec())
            .collect();
        Ok(ForwardOutput {
            distribution: GradeDistribution {
                probs: g.value(probs).data().to_vec(),
            },
            features,
        })
    }

    /// Records the cross-entropy of `seq` against `target`, scaled by `scale`.
    pub fn loss(&self, store: &ParamStore, seq: &TokenSequence, target: usize, scale: f64) -> Result<(Tape, NodeId, f64)> {
        let mut g = Graph::new(store);
        let built = self.build(&mut g, seq, LengthPolicy::Effective)?;
        let ce = g.cross_entropy(built.logits, target)?;
        let raw = g.value(ce).data()[0];
        let loss = if scale == 1.0 { ce } else { g.scale(ce, scale) };
        Ok((g.into_tape(), loss, raw))
    }
}

fn check_span(seq: &TokenSequence, len: usize) -> Result<Range<usize>> {
    let span = seq.edit_span.clone();
    if span.is_empty() || span.end > seq.real_length || span.end > len {
        return Err(Error::shape("forward", format!("edit span {span:?} outside real tokens")));
    }
    Ok(span)
}

/// A random well-formed input: `BOS w… # w… / w… # w… EOS` then padding,
/// with word ids drawn from the non-reserved part of the vocabulary.
pub fn synthetic_sequence<R: rand::Rng + ?Sized>(rng: &mut R, vocab_size: usize, seq_len: usize) -> TokenSequence {
    use crate::textprep::{BOS, EOS, HASH, PAD, SLASH};
    assert!(seq_len >= 6 && vocab_size > RESERVED_COUNT, "too small for a synthetic sequence");
    let free = seq_len - 6;
    let word = |rng: &mut R| rng.random_range(RESERVED_COUNT as u32..vocab_size as u32);
    let n_prefix = rng.random_range(0..=free / 3);
    let n_span = rng.random_range(0..=(free - n_prefix) / 3);
    let n_edit = rng.random_range(1..=(free - n_prefix - n_span).max(1));
    let n_suffix = rng.random_range(0..=free + 1 - n_prefix - n_span - n_edit);
    let mut ids = vec![BOS];
    ids.extend((0..n_prefix).map(|_| word(rng)));
    ids.push(HASH);
    ids.extend((0..n_span).map(|_| word(rng)));
    ids.push(SLASH);
    let start = ids.len();
    ids.extend((0..n_edit).map(|_| word(rng)));
    let end = ids.len();
    ids.push(HASH);
    ids.extend((0..n_suffix).map(|_| word(rng)));
    ids.push(EOS);
    let real_length = ids.len();
    ids.resize(seq_len, PAD);
    TokenSequence {
        ids,
        real_length,
        edit_span: start..end,
    }
}

const RESERVED_COUNT: usize = crate::textprep::RESERVED.len();

/// A network together with its weights.
#[derive(Debug, Clone)]
pub struct JokeMeter {
    net: Network,
    params: ParamStore,
}

fn conv_names(r: usize) -> (String, String) {
    (format!("conv{r}.filters"), format!("conv{r}.bias"))
}

/// Parameter names and shapes in storage order.
fn param_specs(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (v, d, f) = (cfg.vocab_size, cfg.embedding_dim, cfg.filters_per_region);
    let mut specs = vec![("embedding".to_string(), vec![v, d])];
    if cfg.use_conv_features {
        for &r in &cfg.region_sizes {
            let (wn, bn) = conv_names(r);
            specs.push((wn, vec![f, r, d]));
            specs.push((bn, vec![f]));
        }
    }
    specs.push(("output.weight".to_string(), vec![cfg.num_grades, cfg.feature_width()]));
    specs.push(("output.bias".to_string(), vec![cfg.num_grades]));
    specs
}

fn layout_for(cfg: &ModelConfig) -> Layout {
    let n_conv = if cfg.use_conv_features { cfg.region_sizes.len() } else { 0 };
    Layout {
        embedding: ParamId(0),
        convs: (0..n_conv).map(|i| (ParamId(1 + 2 * i), ParamId(2 + 2 * i))).collect(),
        out_w: ParamId(1 + 2 * n_conv),
        out_b: ParamId(2 + 2 * n_conv),
    }
}

impl JokeMeter {
    /// Seeded initialization: Xavier-uniform filters and output weights,
    /// N(0, 0.1) embeddings, zero biases.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, shape) in param_specs(&cfg) {
            let t = match shape.as_slice() {
                [_, _] if name == "embedding" => init::normal(&mut rng, &shape, EMBEDDING_INIT_STD),
                [f, r, d] => init::xavier_uniform(&mut rng, &shape, r * d, r * f),
                [m, n] => init::xavier_uniform(&mut rng, &shape, *n, *m),
                _ => Tensor::zeros(&shape),
            };
            store.add(name, t);
        }
        let layout = layout_for(&cfg);
        Ok(JokeMeter {
            net: Network { cfg, layout },
            params: store,
        })
    }

    /// Rebuilds a model from named parameters, checking every shape.
    pub fn from_params(cfg: ModelConfig, params: ParamStore) -> Result<Self> {
        cfg.validate()?;
        let specs = param_specs(&cfg);
        if specs.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                specs.len(),
                params.len()
            )));
        }
        for ((name, shape), got) in specs.iter().zip(params.iter()) {
            if *name != got.name || shape.as_slice() != got.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` {:?} does not match expected `{name}` {shape:?}",
                    got.name,
                    got.tensor.shape(),
                )));
            }
        }
        let layout = layout_for(&cfg);
        Ok(JokeMeter {
            net: Network { cfg, layout },
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.cfg
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parts_mut(&mut self) -> (&Network, &mut ParamStore) {
        (&self.net, &mut self.params)
    }

    pub fn embedding_id(&self) -> ParamId {
        self.net.layout.embedding
    }

    pub fn encode(&self, vocab: &Vocab, h: &HeadlineEdit) -> Result<TokenSequence> {
        if vocab.len() != self.net.cfg.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} tokens but the model expects {}",
                vocab.len(),
                self.net.cfg.vocab_size
            )));
        }
        encode_headline(vocab, h, self.net.cfg.lowercase, self.net.cfg.seq_len)
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<ForwardOutput> {
        self.net.forward_with(&self.params, seq, LengthPolicy::Effective)
    }

    pub fn predict_task1(&self, vocab: &Vocab, h: &HeadlineEdit) -> Result<f64> {
        let seq = self.encode(vocab, h)?;
        Ok(self.forward(&seq)?.distribution.expected_grade())
    }

    pub fn predict_task2(&self, vocab: &Vocab, pair: &EditPair) -> Result<PairLabel> {
        let a = self.predict_task1(vocab, &pair.first)?;
        let b = self.predict_task1(vocab, &pair.second)?;
        Ok(decide_pair(a, b))
    }

    /// Expected grades for many records; parallel over records, order kept.
    pub fn predict_many(&self, vocab: &Vocab, records: &[HeadlineEdit]) -> Result<Vec<f64>> {
        records.par_iter().map(|h| self.predict_task1(vocab, h)).collect()
    }

    pub fn predict_pairs(&self, vocab: &Vocab, pairs: &[EditPair]) -> Result<Vec<PairLabel>> {
        pairs.par_iter().map(|p| self.predict_task2(vocab, p)).collect()
    }

    pub fn pooled_features(&self, vocab: &Vocab, records: &[HeadlineEdit]) -> Result<Vec<PooledFeatures>> {
        records
            .par_iter()
            .map(|h| Ok(self.forward(&self.encode(vocab, h)?)?.features))
            .collect()
    }

    /// Finite-difference check of the cross-entropy gradient for one input:
    /// every conv and output coordinate plus the embedding rows the input uses.
    pub fn grad_check(&mut self, seq: &TokenSequence, target: usize, cfg: GradCheckConfig) -> Result<GradCheckReport> {
        let emb = self.net.layout.embedding;
        let mut rows: Vec<usize> = seq.ids.iter().map(|&i| i as usize).collect();
        rows.retain(|&r| r < self.net.cfg.vocab_size);
        let mut coords = row_coords(&self.params, emb, &rows);
        let rest: Vec<ParamId> = self.params.ids().filter(|&p| p != emb).collect();
        coords.extend(all_coords(&self.params, &rest));
        let (net, store) = self.parts_mut();
        grad_check(store, &coords, cfg, |s| {
            let (tape, loss, _) = net.loss(s, seq, target, 1.0)?;
            Ok((tape, loss))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{encode, train_vocab};

    fn tiny_cfg(vocab: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: 6,
            vocab_size: vocab,
            seq_len: 24,
            ..ModelConfig::default()
        }
    }

    fn sample() -> (Vocab, TokenSequence) {
        let s = "⟨BOS⟩ police # arrest / hug # suspect ⟨EOS⟩";
        let v = train_vocab([s], 100).unwrap();
        let seq = encode(&v, s, 24).unwrap();
        (v, seq)
    }

    #[test]
    fn feature_widths() {
        assert_eq!(ModelConfig::jokemeter().feature_width(), 136);
        assert_eq!(ModelConfig::boosted().feature_width(), 8192);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = |f: fn(&mut ModelConfig)| {
            let mut c = ModelConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.region_sizes = vec![2, 2]));
        assert!(bad(|c| c.region_sizes = vec![1, 3]));
        assert!(bad(|c| c.embedding_dim = 0));
        assert!(bad(|c| {
            c.use_conv_features = false;
            c.use_edit_embedding = false;
        }));
    }

    #[test]
    fn expected_grade_examples() {
        assert_eq!(expected_grade(&[1.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(expected_grade(&[0.25; 4]), 1.5);
        assert!((expected_grade(&[0.1, 0.2, 0.3, 0.4]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pair_decisions() {
        assert_eq!(decide_pair(2.0, 1.0), PairLabel::First);
        assert_eq!(decide_pair(0.5, 0.50001), PairLabel::Second);
        assert_eq!(decide_pair(1.25, 1.25), PairLabel::First);
    }

    #[test]
    fn forward_structure() {
        let (v, seq) = sample();
        let m = JokeMeter::new(tiny_cfg(v.len()), 3).unwrap();
        let out = m.forward(&seq).unwrap();
        assert_eq!(out.features.len(), 8);
        let s: f64 = out.distribution.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let g = out.distribution.expected_grade();
        assert!((0.0..=3.0).contains(&g));
    }

    #[test]
    fn zero_parameters_give_uniform_distribution() {
        let (v, seq) = sample();
        let mut m = JokeMeter::new(tiny_cfg(v.len()), 3).unwrap();
        for p in m.params_mut().iter_mut() {
            p.tensor.fill(0.0);
        }
        let out = m.forward(&seq).unwrap();
        assert!(out.distribution.probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(out.distribution.expected_grade(), 1.5);
    }

    #[test]
    fn effective_length_matches_full_length() {
        let (v, seq) = sample();
        for seed in 0..5 {
            let m = JokeMeter::new(tiny_cfg(v.len()), seed).unwrap();
            let full = m.network().forward_with(m.params(), &seq, LengthPolicy::Full).unwrap();
            let eff = m.network().forward_with(m.params(), &seq, LengthPolicy::Effective).unwrap();
            assert_eq!(full.features, eff.features);
            for (a, b) in full.distribution.probs.iter().zip(&eff.distribution.probs) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn vocab_mismatch_is_an_error() {
        let (v, _) = sample();
        let m = JokeMeter::new(tiny_cfg(v.len() + 1), 0).unwrap();
        let h = HeadlineEdit::new("1", "police <arrest/> suspect", "hug", &[1; 5], 1.0).unwrap();
        assert!(m.predict_task1(&v, &h).is_err());
    }

    #[test]
    fn from_params_checks_shapes() {
        let m = JokeMeter::new(tiny_cfg(20), 0).unwrap();
        let other = JokeMeter::new(tiny_cfg(21), 0).unwrap();
        assert!(JokeMeter::from_params(tiny_cfg(20), m.params().clone()).is_ok());
        assert!(JokeMeter::from_params(tiny_cfg(20), other.params().clone()).is_err());
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ModelConfig {
            embedding_dim: 5,
            vocab_size: 30,
            seq_len: 16,
            ..ModelConfig::default()
        };
        let mut m = JokeMeter::new(cfg, 3).unwrap();
        let seq = synthetic_sequence(&mut rng, 30, 16);
        let r = m.grad_check(&seq, 2, GradCheckConfig::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.checked > 100);
    }

    #[test]
    fn synthetic_sequences_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let s = synthetic_sequence(&mut rng, 20, 16);
            assert_eq!(s.ids.len(), 16);
            assert!(s.real_length <= 16 && !s.edit_span.is_empty());
            assert_eq!(s.ids[s.real_length - 1], crate::textprep::EOS);
            assert_eq!(s.ids[s.edit_span.start - 1], crate::textprep::SLASH);
            assert_eq!(s.ids[s.edit_span.end], crate::textprep::HASH);
        }
    }
}
