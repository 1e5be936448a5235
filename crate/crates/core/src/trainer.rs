//! Training instances, the AdamW loop, and early stopping on dev RMSE.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, HeadlineEdit, GRADES_KEPT};
use crate::error::{Error, Result};
use crate::evalio::rmse;
use crate::model::{JokeMeter, ModelConfig};
use crate::tensor::{AdamW, AdamWConfig};
use crate::textprep::{TokenSequence, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every sample copied five times, one copy per grade.
    AllGrades,
    /// One instance per sample, targeting the third grade.
    ThirdGrade,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-grades" | "all_grades" => Ok(Regime::AllGrades),
            "third" | "3" | "third-grade" | "third_grade" => Ok(Regime::ThirdGrade),
            _ => Err(Error::Config(format!("unknown regime `{s}`"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::AllGrades => "all_grades",
            Regime::ThirdGrade => "third_grade",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub regime: Regime,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epochs without strict dev-RMSE improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::AllGrades,
            batch_size: 16,
            learning_rate: 1e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 5,
            max_epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn boosted() -> Self {
        TrainConfig {
            batch_size: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size, patience and max epochs must be ≥ 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainInstance {
    pub seq: Arc<TokenSequence>,
    pub target_class: usize,
    pub source_id: String,
}

/// `(record index, target grade)` for every training instance.
pub fn regime_targets(records: &[HeadlineEdit], regime: Regime) -> Vec<(usize, u8)> {
    match regime {
        Regime::AllGrades => records
            .iter()
            .enumerate()
            .flat_map(|(i, h)| h.grades.iter().map(move |&g| (i, g)))
            .collect(),
        Regime::ThirdGrade => records.iter().enumerate().map(|(i, h)| (i, h.grades[2])).collect(),
    }
}

fn build_instances(
    ds: &Dataset<HeadlineEdit>,
    regime: Regime,
    encode: impl Fn(&HeadlineEdit) -> Result<TokenSequence>,
) -> Result<Vec<TrainInstance>> {
    let seqs = ds
        .iter()
        .map(|h| encode(h).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    Ok(regime_targets(&ds.records, regime)
        .into_iter()
        .map(|(i, g)| TrainInstance {
            seq: Arc::clone(&seqs[i]),
            target_class: usize::from(g),
            source_id: ds.records[i].id.clone(),
        })
        .collect())
}

/// Five instances per sample, instance `j` targeting `grades[j]`.
pub fn expand_all_grades(
    ds: &Dataset<HeadlineEdit>,
    encode: impl Fn(&HeadlineEdit) -> Result<TokenSequence>,
) -> Result<Vec<TrainInstance>> {
    let out = build_instances(ds, Regime::AllGrades, encode)?;
    debug_assert_eq!(out.len(), GRADES_KEPT * ds.len());
    Ok(out)
}

/// One instance per sample targeting the third grade of the descending list.
pub fn select_third_grade(
    ds: &Dataset<HeadlineEdit>,
    encode: impl Fn(&HeadlineEdit) -> Result<TokenSequence>,
) -> Result<Vec<TrainInstance>> {
    build_instances(ds, Regime::ThirdGrade, encode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Stops once `patience` consecutive epochs fail to beat the best dev RMSE.
/// Only a strictly lower value counts as an improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, dev_rmse: f64) -> StopDecision {
        let improved = match self.best {
            None => !dev_rmse.is_nan(),
            Some((_, best)) => dev_rmse < best,
        };
        if improved {
            self.best = Some((epoch, dev_rmse));
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::NoImprovement
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_rmse: f64,
    pub stop_reason: StopReason,
}

impl TrainReport {
    /// One JSON object per epoch.
    pub fn write_run_log<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n").map_err(|e| Error::io("<run log>", e))?;
        }
        Ok(())
    }
}

/// Epoch driver shared by the trainer and its tests. `epoch_fn` trains one
/// epoch (1-based) and returns `(train_loss, dev_rmse)`; `snapshot` captures
/// the state whenever dev RMSE improves.
pub fn fit_loop<T, S>(
    state: &mut T,
    max_epochs: usize,
    patience: usize,
    mut epoch_fn: impl FnMut(&mut T, usize) -> Result<(f64, f64)>,
    mut snapshot: impl FnMut(&T) -> S,
) -> Result<(Option<S>, TrainReport)> {
    let mut stopper = EarlyStopping::new(patience);
    let mut epochs = Vec::new();
    let mut best = None;
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=max_epochs {
        let (train_loss, dev_rmse) = epoch_fn(state, epoch)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_rmse,
        });
        match stopper.observe(epoch, dev_rmse) {
            StopDecision::Improved => best = Some(snapshot(state)),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    let (best_epoch, best_dev_rmse) = stopper.best().unwrap_or((0, f64::NAN));
    Ok((
        best,
        TrainReport {
            epochs,
            best_epoch,
            best_dev_rmse,
            stop_reason,
        },
    ))
}

/// Dev RMSE of expected grades against the stored mean grades.
pub fn dev_rmse(model: &JokeMeter, seqs: &[TokenSequence], truths: &[f64]) -> Result<f64> {
    let preds = seqs
        .par_iter()
        .map(|s| Ok(model.forward(s)?.distribution.expected_grade()))
        .collect::<Result<Vec<f64>>>()?;
    rmse(&preds, truths)
}

/// Trains from a fresh seeded model (or `init`) and returns the checkpoint
/// with the best dev RMSE.
///
/// A learning rate of exactly zero runs the loop without optimizer steps.
pub fn train(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    vocab: &Vocab,
    train_ds: &Dataset<HeadlineEdit>,
    dev_ds: &Dataset<HeadlineEdit>,
    init: Option<JokeMeter>,
) -> Result<(JokeMeter, TrainReport)> {
    tcfg.validate()?;
    if train_ds.is_empty() || dev_ds.is_empty() {
        return Err(Error::EmptyInput { op: "train" });
    }
    let mut model = match init {
        Some(m) => {
            if m.config() != mcfg {
                return Err(Error::Config("initial model does not match the model config".into()));
            }
            m
        }
        None => JokeMeter::new(mcfg.clone(), tcfg.seed)?,
    };
    let instances = build_instances(train_ds, tcfg.regime, |h| model.encode(vocab, h))?;
    let dev_seqs = dev_ds
        .iter()
        .map(|h| model.encode(vocab, h))
        .collect::<Result<Vec<_>>>()?;
    let dev_truth: Vec<f64> = dev_ds.iter().map(|h| h.mean_grade).collect();

    let mut optimizer = if tcfg.learning_rate > 0.0 {
        Some(AdamW::new(tcfg.optimizer())?)
    } else {
        None
    };
    // Shuffling has its own stream so it does not depend on model init draws.
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..instances.len()).collect();

    let (best, report) = fit_loop(
        &mut model,
        tcfg.max_epochs,
        tcfg.patience,
        |model, epoch| {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(tcfg.batch_size) {
                let (net, store) = model.parts_mut();
                store.zero_grad();
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let inst = &instances[i];
                    let (tape, loss, raw) = net.loss(store, &inst.seq, inst.target_class, scale)?;
                    if !raw.is_finite() {
                        return Err(Error::Diverged { epoch, loss: raw });
                    }
                    total += raw;
                    tape.backward(loss, store)?;
                }
                if let Some(opt) = optimizer.as_mut() {
                    opt.step(store);
                }
            }
            let train_loss = total / instances.len() as f64;
            let rmse = dev_rmse(model, &dev_seqs, &dev_truth)?;
            log::info!("epoch {epoch}: train loss {train_loss:.6}, dev RMSE {rmse:.6}");
            Ok((train_loss, rmse))
        },
        |model| model.clone(),
    )?;
    Ok((best.unwrap_or(model), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn ds(grades: &[[u8; 5]]) -> Dataset<HeadlineEdit> {
        Dataset {
            split: Split::Train,
            records: grades
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let mean = g.iter().map(|&x| f64::from(x)).sum::<f64>() / 5.0;
                    HeadlineEdit::new(i.to_string(), "a <b/> c", "d", g, mean).unwrap()
                })
                .collect(),
        }
    }

    fn dummy(_: &HeadlineEdit) -> Result<TokenSequence> {
        Ok(TokenSequence {
            ids: vec![0; 4],
            real_length: 1,
            edit_span: 0..1,
        })
    }

    #[test]
    fn all_grades_expansion() {
        let one = expand_all_grades(&ds(&[[3, 2, 1, 1, 0]]), dummy).unwrap();
        let targets: Vec<_> = one.iter().map(|i| i.target_class).collect();
        assert_eq!(targets, [3, 2, 1, 1, 0]);
        assert_eq!(expand_all_grades(&ds(&[[1; 5]; 10]), dummy).unwrap().len(), 50);
        assert!(expand_all_grades(&ds(&[[2; 5]]), dummy)
            .unwrap()
            .iter()
            .all(|i| i.target_class == 2));
    }

    #[test]
    fn third_grade_selection() {
        let t = select_third_grade(&ds(&[[3, 2, 1, 1, 0], [2, 2, 2, 0, 0]]), dummy).unwrap();
        assert_eq!(t.iter().map(|i| i.target_class).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(select_third_grade(&ds(&[[0; 5]; 10]), dummy).unwrap().len(), 10);
    }

    #[test]
    fn early_stopping_requires_strict_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(es.observe(2, 0.5), StopDecision::NoImprovement);
        assert_eq!(es.observe(3, 0.4), StopDecision::Improved);
        assert_eq!(es.observe(4, 0.6), StopDecision::NoImprovement);
        assert_eq!(es.observe(5, 0.4), StopDecision::Stop);
        assert_eq!(es.best(), Some((3, 0.4)));
    }

    #[test]
    fn fit_loop_returns_best_snapshot() {
        let seq = [0.9, 0.8, 0.85, 0.86, 0.87, 0.88, 0.89, 0.1];
        let mut state = 0usize;
        let (best, report) = fit_loop(
            &mut state,
            20,
            5,
            |s, e| {
                *s = e;
                Ok((0.0, seq[e - 1]))
            },
            |s| *s,
        )
        .unwrap();
        assert_eq!(best, Some(2));
        assert_eq!(report.epochs.len(), 7);
        assert_eq!(report.stop_reason, StopReason::Patience);
        assert_eq!(report.best_dev_rmse, 0.8);
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("all".parse::<Regime>().unwrap(), Regime::AllGrades);
        assert_eq!("third".parse::<Regime>().unwrap(), Regime::ThirdGrade);
        assert!("x".parse::<Regime>().is_err());
    }
}
