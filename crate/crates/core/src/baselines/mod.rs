//! Non-neural baselines on TF-IDF word features, plus the constant
//! predictors used as reference points.
//!
//! Each classifier predicts an integer grade class. Task 1 scores that class
//! directly against the mean grade; Task 2 compares the classes predicted for
//! the two edited headlines.

mod knn;
mod nbc;
mod svm;
mod tfidf;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use knn::Knn;
pub use nbc::MultinomialNb;
pub use svm::{LinearSvm, SvmConfig};
pub use tfidf::{tokenize, SparseVec, TfidfModel};
pub use tree::{DecisionTree, TreeConfig};

use crate::corpus::{EditPair, HeadlineEdit, PairLabel};
use crate::error::{Error, Result};
use crate::evalio::Task;
use crate::model::decide_pair;
use crate::trainer::{regime_targets, Regime};

pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Dtc,
    Svm,
    Knn,
    Nbc,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Dtc, BaselineKind::Svm, BaselineKind::Knn, BaselineKind::Nbc];
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Dtc => "dtc",
            BaselineKind::Svm => "svm",
            BaselineKind::Knn => "knn",
            BaselineKind::Nbc => "nbc",
        })
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtc" => Ok(BaselineKind::Dtc),
            "svm" => Ok(BaselineKind::Svm),
            "knn" | "k-nn" => Ok(BaselineKind::Knn),
            "nbc" => Ok(BaselineKind::Nbc),
            _ => Err(Error::Config(format!("unknown baseline `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureVariant {
    /// The unmarked original headline followed by the edit word.
    OrigPlusEdit,
    /// Only the edit word.
    EditOnly,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 2] = [FeatureVariant::OrigPlusEdit, FeatureVariant::EditOnly];

    pub fn text(self, h: &HeadlineEdit) -> String {
        match self {
            FeatureVariant::OrigPlusEdit => format!("{} {}", h.unmarked_original(), h.edit),
            FeatureVariant::EditOnly => h.edit.clone(),
        }
    }
}

impl std::fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureVariant::OrigPlusEdit => "orig_plus_edit",
            FeatureVariant::EditOnly => "edit_only",
        })
    }
}

impl std::str::FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig_plus_edit" | "orig+edit" | "orig-plus-edit" => Ok(FeatureVariant::OrigPlusEdit),
            "edit_only" | "edit" | "edit-only" => Ok(FeatureVariant::EditOnly),
            _ => Err(Error::Config(format!("unknown feature variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub tree: TreeConfig,
    pub svm: SvmConfig,
    pub knn_k_task1: usize,
    pub knn_k_task2: usize,
    pub nbc_alpha: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            tree: TreeConfig::default(),
            svm: SvmConfig::default(),
            knn_k_task1: 5,
            knn_k_task2: 13,
            nbc_alpha: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Dtc(DecisionTree),
    Svm(LinearSvm),
    Knn(Knn),
    Nbc(MultinomialNb),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    kind: BaselineKind,
    variant: FeatureVariant,
    cfg: BaselineConfig,
    tfidf: TfidfModel,
    fitted: Fitted,
}

impl BaselineModel {
    /// Fits on one document per record; `targets` pairs a document index with
    /// a grade class. TF-IDF statistics come from the documents, not the
    /// possibly duplicated targets.
    pub fn fit_documents(
        kind: BaselineKind,
        variant: FeatureVariant,
        cfg: &BaselineConfig,
        docs: &[String],
        targets: &[(usize, u8)],
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyInput { op: "baseline fit" });
        }
        if let Some(&(_, g)) = targets.iter().find(|t| usize::from(t.1) >= NUM_CLASSES) {
            return Err(Error::TargetOutOfRange {
                target: usize::from(g),
                classes: NUM_CLASSES,
            });
        }
        let tfidf = TfidfModel::fit(docs)?;
        let dim = tfidf.dim();
        let ys: Vec<u8> = targets.iter().map(|t| t.1).collect();
        let fitted = if kind == BaselineKind::Nbc {
            let counts: Vec<SparseVec> = docs.iter().map(|d| tfidf.counts(d)).collect();
            let xs: Vec<SparseVec> = targets.iter().map(|t| counts[t.0].clone()).collect();
            Fitted::Nbc(MultinomialNb::fit(&xs, &ys, dim, cfg.nbc_alpha)?)
        } else {
            let vecs: Vec<SparseVec> = docs.iter().map(|d| tfidf.transform(d)).collect();
            let xs: Vec<SparseVec> = targets.iter().map(|t| vecs[t.0].clone()).collect();
            match kind {
                BaselineKind::Dtc => Fitted::Dtc(DecisionTree::fit(&xs, &ys, cfg.tree)?),
                BaselineKind::Svm => Fitted::Svm(LinearSvm::fit(&xs, &ys, dim, cfg.svm, cfg.seed)?),
                BaselineKind::Knn => Fitted::Knn(Knn::fit(&xs, &ys, dim)?),
                BaselineKind::Nbc => unreachable!(),
            }
        };
        Ok(BaselineModel {
            kind,
            variant,
            cfg: cfg.clone(),
            tfidf,
            fitted,
        })
    }

    /// Fits on Task 1 records with targets from the given regime.
    pub fn fit(
        kind: BaselineKind,
        variant: FeatureVariant,
        regime: Regime,
        cfg: &BaselineConfig,
        records: &[HeadlineEdit],
    ) -> Result<Self> {
        let docs: Vec<String> = records.iter().map(|h| variant.text(h)).collect();
        Self::fit_documents(kind, variant, cfg, &docs, &regime_targets(records, regime))
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn variant(&self) -> FeatureVariant {
        self.variant
    }

    /// Grade class for a raw document; `task` only selects k for k-NN.
    pub fn predict_text(&self, text: &str, task: Task) -> u8 {
        match &self.fitted {
            Fitted::Dtc(m) => m.predict(&self.tfidf.transform(text)),
            Fitted::Svm(m) => m.predict(&self.tfidf.transform(text)),
            Fitted::Knn(m) => {
                let k = match task {
                    Task::Task1 => self.cfg.knn_k_task1,
                    Task::Task2 => self.cfg.knn_k_task2,
                };
                m.predict(&self.tfidf.transform(text), k)
            }
            Fitted::Nbc(m) => m.predict(&self.tfidf.counts(text)),
        }
    }

    pub fn predict_task1(&self, h: &HeadlineEdit) -> u8 {
        self.predict_text(&self.variant.text(h), Task::Task1)
    }

    /// Compares the classes predicted for both edits; equal classes give
    /// the first edit.
    pub fn predict_task2(&self, pair: &EditPair) -> PairLabel {
        let a = self.predict_text(&self.variant.text(&pair.first), Task::Task2);
        let b = self.predict_text(&self.variant.text(&pair.second), Task::Task2);
        decide_pair(f64::from(a), f64::from(b))
    }

    pub fn predict_many_task1(&self, records: &[HeadlineEdit]) -> Vec<u8> {
        records.par_iter().map(|h| self.predict_task1(h)).collect()
    }

    pub fn predict_many_task2(&self, pairs: &[EditPair]) -> Vec<PairLabel> {
        pairs.par_iter().map(|p| self.predict_task2(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantBaselines {
    /// Mean of the Task 1 training mean grades.
    pub mean_grade: f64,
    /// Most frequent non-tie Task 2 training label, if Task 2 data was given.
    pub most_frequent_label: Option<PairLabel>,
}

pub fn constant_baselines(task1: &[HeadlineEdit], task2: Option<&[EditPair]>) -> Result<ConstantBaselines> {
    if task1.is_empty() {
        return Err(Error::EmptyInput { op: "constant baselines" });
    }
    let mean_grade = task1.iter().map(|h| h.mean_grade).sum::<f64>() / task1.len() as f64;
    let most_frequent_label = match task2 {
        None => None,
        Some(pairs) => {
            let first = pairs.iter().filter(|p| p.label == Some(PairLabel::First)).count();
            let second = pairs.iter().filter(|p| p.label == Some(PairLabel::Second)).count();
            if first + second == 0 {
                return Err(Error::EmptyInput { op: "constant baselines" });
            }
            Some(if second > first { PairLabel::Second } else { PairLabel::First })
        }
    };
    Ok(ConstantBaselines {
        mean_grade,
        most_frequent_label,
    })
}
