//! Command-line harness: argument types, config layering, and one function
//! per subcommand. The `jokemeter` binary only parses arguments and calls
//! [`run`].
//!
//! Config precedence, lowest first: built-in preset, `--config` TOML file,
//! command-line flags. `JOKEMETER_OUT_DIR` and `JOKEMETER_THREADS` supply
//! defaults for `--out-dir` and `--threads`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{feature_correlation_report, AnalysisReport};
use crate::baselines::{constant_baselines, BaselineConfig, BaselineKind, BaselineModel, FeatureVariant};
use crate::corpus::{parse_task1_file, parse_task2_file, Dataset, HeadlineEdit, ParseOptions, Split};
use crate::evalio::{
    accuracy, load_predictions, rmse, save_predictions, score_task1, score_task2, Predictions, ScoreCard, Task,
};
use crate::model::{synthetic_sequence, Checkpoint, JokeMeter, ModelConfig};
use crate::tensor::GradCheckConfig;
use crate::textprep::{model_input, train_vocab, Vocab};
use crate::trainer::{train, Regime, TrainConfig, TrainReport};

#[derive(Debug, Parser)]
#[command(name = "jokemeter", version, about = "Humor grading of edited news headlines")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Directory receiving every output file and the manifest.
    #[arg(long, global = true, env = "JOKEMETER_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for parallel prediction and sweeps.
    #[arg(long, global = true, env = "JOKEMETER_THREADS")]
    pub threads: Option<usize>,
    /// TOML file with `[model]`, `[train]` and `[baseline]` tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Skip malformed data rows with a warning instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Overrides the seed of the training and baseline configs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl GlobalArgs {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        GlobalArgs {
            out_dir: out_dir.into(),
            threads: None,
            config: None,
            lenient: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Dataset statistics and, given a checkpoint, the pooled-feature table.
    Analyze(AnalyzeArgs),
    /// Train a JokeMeter model with early stopping on the dev set.
    Train(TrainArgs),
    /// Write predictions in `id,pred` form.
    Predict(PredictArgs),
    /// Score a prediction file against gold data.
    Score(ScoreArgs),
    /// Run the TF-IDF baseline grid and the constant predictors.
    Baseline(BaselineArgs),
    /// Dev RMSE over one hyperparameter axis, averaged over seeds.
    Sweep(SweepArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Jokemeter,
    JokemeterBoosted,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelOverrides {
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub region_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub no_edit_embedding: bool,
    #[arg(long)]
    pub no_conv_features: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Adds the pooled-feature table for the training set.
    #[arg(long, requires = "vocab")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, value_enum, default_value = "jokemeter")]
    pub preset: Preset,
    /// Existing vocabulary; otherwise one is learned from the training set.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Continue from a checkpoint (requires the matching `--vocab`).
    #[arg(long, requires = "vocab")]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelOverrides,
    #[command(flatten)]
    pub train_opts: TrainOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "1")]
    pub task: Task,
    /// Defaults to `<out-dir>/predictions.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long, default_value = "1")]
    pub task: Task,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    /// Task 1 training data.
    #[arg(long)]
    pub train: PathBuf,
    /// Task 1 evaluation data.
    #[arg(long)]
    pub test1: Option<PathBuf>,
    /// Task 2 training data, used only for the most-frequent-label baseline.
    #[arg(long)]
    pub train2: Option<PathBuf>,
    /// Task 2 evaluation data.
    #[arg(long)]
    pub test2: Option<PathBuf>,
    /// Restrict the grid; all kinds when omitted.
    #[arg(long)]
    pub kind: Option<BaselineKind>,
    #[arg(long)]
    pub variant: Option<FeatureVariant>,
    #[arg(long)]
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    EmbeddingDim,
    FiltersPerRegion,
    BatchLr,
    Ablation,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jokemeter")]
    pub preset: Preset,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Uncapped grids (up to 2048 filters per region size).
    #[arg(long)]
    pub full: bool,
    /// Custom values for the embedding or filter axis.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Run only the grid point with this index.
    #[arg(long)]
    pub point: Option<usize>,
    #[command(flatten)]
    pub train_opts: TrainOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 16)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 64)]
    pub vocab_size: usize,
    #[arg(long, value_enum, default_value = "jokemeter")]
    pub preset: Preset,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Everything a run can be configured with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Jokemeter => RunConfig {
                model: ModelConfig::jokemeter(),
                train: TrainConfig::default(),
                baseline: BaselineConfig::default(),
            },
            Preset::JokemeterBoosted => RunConfig {
                model: ModelConfig::boosted(),
                train: TrainConfig::boosted(),
                baseline: BaselineConfig::default(),
            },
        }
    }

    /// Applies the keys present in a TOML document on top of `self`.
    pub fn overlay_toml(self, text: &str) -> crate::Result<Self> {
        let bad = |e: &dyn std::fmt::Display| crate::Error::Config(e.to_string());
        let mut base = toml::Value::try_from(&self).map_err(|e| bad(&e))?;
        let top: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        merge(&mut base, toml::Value::Table(top));
        base.try_into().map_err(|e: toml::de::Error| bad(&e))
    }

    pub fn overlay_file(self, path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        self.overlay_toml(&text)
    }

    fn apply_model(&mut self, o: &ModelOverrides) {
        let m = &mut self.model;
        if let Some(v) = o.embedding_dim {
            m.embedding_dim = v;
        }
        if let Some(v) = o.filters {
            m.filters_per_region = v;
        }
        if let Some(v) = &o.region_sizes {
            m.region_sizes = v.clone();
        }
        if let Some(v) = o.seq_len {
            m.seq_len = v;
        }
        if o.no_edit_embedding {
            m.use_edit_embedding = false;
        }
        if o.no_conv_features {
            m.use_conv_features = false;
        }
    }

    fn apply_train(&mut self, o: &TrainOverrides) {
        let t = &mut self.train;
        if let Some(v) = o.regime {
            t.regime = v;
        }
        if let Some(v) = o.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = o.lr {
            t.learning_rate = v;
        }
        if let Some(v) = o.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = o.patience {
            t.patience = v;
        }
        if let Some(v) = o.max_epochs {
            t.max_epochs = v;
        }
    }
}

fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn resolve(global: &GlobalArgs, preset: Preset) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::preset(preset);
    if let Some(path) = &global.config {
        cfg = cfg.overlay_file(path)?;
    }
    if let Some(s) = global.seed {
        cfg.train.seed = s;
        cfg.baseline.seed = s;
    }
    Ok(cfg)
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> crate::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> anyhow::Result<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    fn write(&mut self, rel: &str, body: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    }

    fn finish(mut self, command: &str, seed: Option<u64>, config: impl Serialize, inputs: &[&Path]) -> anyhow::Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        self.written.sort();
        let m = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            inputs,
            outputs: self.written.clone(),
        };
        let p = self.dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", p.display()))
    }
}

fn load1(path: &Path, split: Split, global: &GlobalArgs) -> anyhow::Result<Dataset<HeadlineEdit>> {
    let opts = ParseOptions {
        split,
        lenient: global.lenient,
    };
    Ok(parse_task1_file(path, opts)?)
}

fn load2(path: &Path, split: Split, global: &GlobalArgs) -> anyhow::Result<Dataset<crate::corpus::EditPair>> {
    let opts = ParseOptions {
        split,
        lenient: global.lenient,
    };
    Ok(parse_task2_file(path, opts)?)
}

/// Learns a subword vocabulary from the model inputs of `ds`.
pub fn learn_vocab(ds: &[HeadlineEdit], cfg: &ModelConfig) -> crate::Result<Vocab> {
    train_vocab(ds.iter().map(|h| model_input(h, cfg.lowercase)), cfg.vocab_size)
}

fn load_checkpoint(path: &Path, vocab: &Vocab) -> anyhow::Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if ck.vocab_hash != vocab.content_hash() {
        bail!("vocabulary does not match the one the checkpoint was trained with");
    }
    Ok(ck)
}

pub fn cmd_analyze(global: &GlobalArgs, a: &AnalyzeArgs) -> anyhow::Result<Vec<AnalysisReport>> {
    let mut out = Outputs::new(&global.out_dir)?;
    let mut inputs: Vec<&Path> = vec![&a.train];
    let mut reports = Vec::new();
    let sets = [(Split::Train, Some(&a.train)), (Split::Dev, a.dev.as_ref()), (Split::Test, a.test.as_ref())];
    let features = match (&a.checkpoint, &a.vocab) {
        (Some(ck), Some(v)) => {
            inputs.push(ck);
            inputs.push(v);
            let vocab = Vocab::load(v)?;
            Some((load_checkpoint(ck, &vocab)?, vocab))
        }
        _ => None,
    };
    for (split, path) in sets {
        let Some(path) = path else { continue };
        if split != Split::Train {
            inputs.push(path);
        }
        let ds = load1(path, split, global)?;
        let name = split.to_string();
        let mut report = AnalysisReport::compute(&name, &ds.records)?;
        if let (Split::Train, Some((ck, vocab))) = (split, &features) {
            report = report.with_features(feature_correlation_report(&ck.model, vocab, &ds.records)?);
        }
        let dir = out.path(&name)?;
        report.write_dir(&dir)?;
        print!("{}", report.to_text());
        reports.push(report);
    }
    out.finish("analyze", None, serde_json::json!({ "lenient": global.lenient }), &inputs)?;
    Ok(reports)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub vocab: PathBuf,
    pub run_log: PathBuf,
    pub report: TrainReport,
    pub config: RunConfig,
}

pub fn cmd_train(global: &GlobalArgs, a: &TrainArgs) -> anyhow::Result<TrainOutcome> {
    let mut cfg = resolve(global, a.preset)?;
    cfg.apply_model(&a.model);
    cfg.apply_train(&a.train_opts);
    let train_ds = load1(&a.train, Split::Train, global)?;
    let dev_ds = load1(&a.dev, Split::Dev, global)?;
    let mut inputs: Vec<&Path> = vec![&a.train, &a.dev];

    let vocab = match &a.vocab {
        Some(p) => {
            inputs.push(p);
            Vocab::load(p)?
        }
        None => learn_vocab(&train_ds.records, &cfg.model)?,
    };
    let init = match &a.resume {
        Some(p) => {
            inputs.push(p);
            let ck = load_checkpoint(p, &vocab)?;
            if ck.model.config() != &cfg.model {
                log::warn!("resuming: model settings come from the checkpoint, not the flags");
            }
            cfg.model = ck.model.config().clone();
            Some(ck.model)
        }
        None => {
            cfg.model.vocab_size = vocab.len();
            None
        }
    };
    log::info!(
        "training on {} samples ({} regime), vocabulary {}",
        train_ds.len(),
        cfg.train.regime,
        vocab.len()
    );
    let (model, report) = train(&cfg.model, &cfg.train, &vocab, &train_ds, &dev_ds, init)?;

    let mut out = Outputs::new(&global.out_dir)?;
    let ck_path = out.path("model.ckpt")?;
    Checkpoint::new(model, vocab.content_hash()).save(&ck_path)?;
    let vocab_path = out.path("vocab.txt")?;
    vocab.save(&vocab_path)?;
    let log_path = out.path("run_log.jsonl")?;
    let mut buf = Vec::new();
    report.write_run_log(&mut buf)?;
    std::fs::write(&log_path, buf)?;
    out.write("train_report.json", serde_json::to_string_pretty(&report)? + "\n")?;
    out.finish("train", Some(cfg.train.seed), &cfg, &inputs)?;
    println!(
        "best dev RMSE {:.4} at epoch {} ({} epochs, stopped by {:?})",
        report.best_dev_rmse,
        report.best_epoch,
        report.epochs.len(),
        report.stop_reason
    );
    Ok(TrainOutcome {
        checkpoint: ck_path,
        vocab: vocab_path,
        run_log: log_path,
        report,
        config: cfg,
    })
}

pub fn cmd_predict(global: &GlobalArgs, a: &PredictArgs) -> anyhow::Result<Predictions> {
    let vocab = Vocab::load(&a.vocab)?;
    let ck = load_checkpoint(&a.checkpoint, &vocab)?;
    let preds = match a.task {
        Task::Task1 => {
            let ds = load1(&a.data, Split::Test, global)?;
            let grades = ck.model.predict_many(&vocab, &ds.records)?;
            Predictions::Task1(ds.iter().map(|h| h.id.clone()).zip(grades).collect())
        }
        Task::Task2 => {
            let ds = load2(&a.data, Split::Test, global)?;
            let labels = ck.model.predict_pairs(&vocab, &ds.records)?;
            Predictions::Task2(ds.iter().map(|p| p.id.clone()).zip(labels).collect())
        }
    };
    let mut out = Outputs::new(&global.out_dir)?;
    let path = match &a.output {
        Some(p) => p.clone(),
        None => out.path("predictions.csv")?,
    };
    save_predictions(&path, &preds)?;
    out.finish(
        "predict",
        None,
        serde_json::json!({ "task": a.task, "model": ck.model.config() }),
        &[&a.checkpoint, &a.vocab, &a.data],
    )?;
    println!("wrote {} predictions to {}", preds.len(), path.display());
    Ok(preds)
}

pub fn cmd_score(global: &GlobalArgs, a: &ScoreArgs) -> anyhow::Result<ScoreCard> {
    let card = match (a.task, load_predictions(&a.predictions, a.task)?) {
        (Task::Task1, Predictions::Task1(p)) => score_task1(&p, &load1(&a.gold, Split::Test, global)?)?,
        (Task::Task2, Predictions::Task2(p)) => score_task2(&p, &load2(&a.gold, Split::Test, global)?)?,
        _ => unreachable!("prediction files are read for the requested task"),
    };
    let mut out = Outputs::new(&global.out_dir)?;
    out.write("score.json", serde_json::to_string_pretty(&card)? + "\n")?;
    out.finish("score", None, serde_json::json!({ "task": a.task }), &[&a.predictions, &a.gold])?;
    println!("{card}");
    Ok(card)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineCell {
    pub kind: BaselineKind,
    pub variant: FeatureVariant,
    pub regime: Regime,
    pub task1: Option<ScoreCard>,
    pub task2: Option<ScoreCard>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub constant_mean_grade: f64,
    pub constant_task1: Option<ScoreCard>,
    pub most_frequent_label: Option<u8>,
    pub constant_task2: Option<ScoreCard>,
    pub cells: Vec<BaselineCell>,
}

fn opt_value(c: &Option<ScoreCard>) -> String {
    c.as_ref().map_or_else(String::new, |c| c.value.to_string())
}

pub fn cmd_baseline(global: &GlobalArgs, a: &BaselineArgs) -> anyhow::Result<BaselineSummary> {
    let cfg = resolve(global, Preset::Jokemeter)?;
    let train_ds = load1(&a.train, Split::Train, global)?;
    let test1 = a.test1.as_ref().map(|p| load1(p, Split::Test, global)).transpose()?;
    let train2 = a.train2.as_ref().map(|p| load2(p, Split::Train, global)).transpose()?;
    let test2 = a.test2.as_ref().map(|p| load2(p, Split::Test, global)).transpose()?;
    let mut out = Outputs::new(&global.out_dir)?;

    let consts = constant_baselines(&train_ds.records, train2.as_ref().map(|d| d.records.as_slice()))?;
    let constant_task1 = match &test1 {
        Some(t) => {
            let truth: Vec<f64> = t.iter().map(|h| h.mean_grade).collect();
            Some(ScoreCard::rmse(rmse(&vec![consts.mean_grade; truth.len()], &truth)?, truth.len()))
        }
        None => None,
    };
    let constant_task2 = match (&test2, consts.most_frequent_label) {
        (Some(t), Some(label)) => {
            let gold: Vec<_> = t.iter().filter_map(|p| p.label).collect();
            let n = gold.iter().filter(|l| **l != crate::corpus::PairLabel::Tie).count();
            Some(ScoreCard::accuracy(accuracy(&vec![label; gold.len()], &gold)?, n))
        }
        _ => None,
    };

    let kinds = a.kind.map_or(BaselineKind::ALL.to_vec(), |k| vec![k]);
    let variants = a.variant.map_or(FeatureVariant::ALL.to_vec(), |v| vec![v]);
    let regimes = a.regime.map_or(vec![Regime::AllGrades, Regime::ThirdGrade], |r| vec![r]);
    let mut cells = Vec::new();
    for &kind in &kinds {
        for &variant in &variants {
            for &regime in &regimes {
                log::info!("baseline {kind} / {variant} / {regime}");
                let m = BaselineModel::fit(kind, variant, regime, &cfg.baseline, &train_ds.records)?;
                let stem = format!("{kind}_{variant}_{regime}");
                let task1 = match &test1 {
                    Some(t) => {
                        let preds: Vec<(String, f64)> = t
                            .iter()
                            .map(|h| h.id.clone())
                            .zip(m.predict_many_task1(&t.records).into_iter().map(f64::from))
                            .collect();
                        let card = score_task1(&preds, t)?;
                        save_predictions(out.path(&format!("{stem}/task1.csv"))?, &Predictions::Task1(preds))?;
                        Some(card)
                    }
                    None => None,
                };
                let task2 = match &test2 {
                    Some(t) => {
                        let preds: Vec<_> = t.iter().map(|p| p.id.clone()).zip(m.predict_many_task2(&t.records)).collect();
                        let card = if t.iter().all(|p| p.label.is_some()) {
                            Some(score_task2(&preds, t)?)
                        } else {
                            None
                        };
                        save_predictions(out.path(&format!("{stem}/task2.csv"))?, &Predictions::Task2(preds))?;
                        card
                    }
                    None => None,
                };
                cells.push(BaselineCell {
                    kind,
                    variant,
                    regime,
                    task1,
                    task2,
                });
            }
        }
    }

    let summary = BaselineSummary {
        constant_mean_grade: consts.mean_grade,
        constant_task1,
        most_frequent_label: consts.most_frequent_label.map(|l| l.as_digit()),
        constant_task2,
        cells,
    };
    let mut csv = String::from("kind,variant,regime,task1_rmse,task2_accuracy\n");
    for c in &summary.cells {
        csv += &format!("{},{},{},{},{}\n", c.kind, c.variant, c.regime, opt_value(&c.task1), opt_value(&c.task2));
    }
    csv += &format!("constant,,,{},{}\n", opt_value(&summary.constant_task1), opt_value(&summary.constant_task2));
    out.write("results.csv", &csv)?;
    out.write("baselines.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    let mut inputs: Vec<&Path> = vec![&a.train];
    inputs.extend([&a.test1, &a.train2, &a.test2].into_iter().flatten().map(PathBuf::as_path));
    out.finish("baseline", Some(cfg.baseline.seed), &cfg.baseline, &inputs)?;
    print!("{csv}");
    Ok(summary)
}

/// One configuration on a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub label: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub const EMBEDDING_GRID: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];
pub const FILTER_GRID_CAPPED: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const FILTER_GRID_FULL: [usize; 12] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048];
pub const BATCH_GRID: [usize; 6] = [2, 4, 8, 16, 32, 64];
pub const LR_GRID: [f64; 3] = [1e-4, 1e-5, 2e-5];

pub fn sweep_points(axis: SweepAxis, base: &RunConfig, full: bool, grid: Option<&[usize]>) -> Vec<SweepPoint> {
    let point = |label: String, f: &dyn Fn(&mut ModelConfig, &mut TrainConfig)| {
        let (mut m, mut t) = (base.model.clone(), base.train.clone());
        f(&mut m, &mut t);
        SweepPoint { label, model: m, train: t }
    };
    match axis {
        SweepAxis::EmbeddingDim => grid
            .unwrap_or(&EMBEDDING_GRID)
            .iter()
            .map(|&d| point(format!("embedding_dim={d}"), &|m, _| m.embedding_dim = d))
            .collect(),
        SweepAxis::FiltersPerRegion => {
            let default: &[usize] = if full { &FILTER_GRID_FULL } else { &FILTER_GRID_CAPPED };
            grid.unwrap_or(default)
                .iter()
                .map(|&f| point(format!("filters_per_region={f}"), &|m, _| m.filters_per_region = f))
                .collect()
        }
        SweepAxis::BatchLr => BATCH_GRID
            .iter()
            .flat_map(|&b| LR_GRID.iter().map(move |&lr| (b, lr)))
            .map(|(b, lr)| {
                point(format!("batch={b},lr={lr:e}"), &|_, t| {
                    t.batch_size = b;
                    t.learning_rate = lr;
                })
            })
            .collect(),
        SweepAxis::Ablation => vec![
            point("conv_features_only".into(), &|m, _| {
                m.use_conv_features = true;
                m.use_edit_embedding = false;
            }),
            point("edit_embedding_only".into(), &|m, _| {
                m.use_conv_features = false;
                m.use_edit_embedding = true;
            }),
            point("conv_features_and_edit_embedding".into(), &|m, _| {
                m.use_conv_features = true;
                m.use_edit_embedding = true;
            }),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub seeds: Vec<u64>,
    pub dev_rmse: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over seeds divided by `sqrt(n)`; 0 for one seed.
    pub stderr: f64,
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn cmd_sweep(global: &GlobalArgs, a: &SweepArgs) -> anyhow::Result<Vec<SweepRow>> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let mut base = resolve(global, a.preset)?;
    base.apply_train(&a.train_opts);
    let train_ds = load1(&a.train, Split::Train, global)?;
    let dev_ds = load1(&a.dev, Split::Dev, global)?;
    let mut inputs: Vec<&Path> = vec![&a.train, &a.dev];
    let vocab = match &a.vocab {
        Some(p) => {
            inputs.push(p);
            Vocab::load(p)?
        }
        None => learn_vocab(&train_ds.records, &base.model)?,
    };
    base.model.vocab_size = vocab.len();

    let mut points = sweep_points(a.axis, &base, a.full, a.grid.as_deref());
    if let Some(i) = a.point {
        if i >= points.len() {
            bail!("--point {i} but the grid has {} points", points.len());
        }
        points = vec![points.swap_remove(i)];
    }
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|s| base.train.seed + s).collect();
    let cells: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let results = cells
        .par_iter()
        .map(|&(p, seed)| {
            let pt = &points[p];
            let tcfg = TrainConfig { seed, ..pt.train.clone() };
            log::info!("sweep cell {} seed {seed}", pt.label);
            let (_, report) = train(&pt.model, &tcfg, &vocab, &train_ds, &dev_ds, None)?;
            Ok(report.best_dev_rmse)
        })
        .collect::<crate::Result<Vec<f64>>>()?;

    let rows: Vec<SweepRow> = points
        .iter()
        .enumerate()
        .map(|(p, pt)| {
            let vals = results[p * seeds.len()..(p + 1) * seeds.len()].to_vec();
            let (mean, stderr) = mean_stderr(&vals);
            SweepRow {
                label: pt.label.clone(),
                seeds: seeds.clone(),
                dev_rmse: vals,
                mean,
                stderr,
            }
        })
        .collect();

    let mut out = Outputs::new(&global.out_dir)?;
    let mut csv = String::from("point,mean_dev_rmse,stderr,runs\n");
    for r in &rows {
        csv += &format!("\"{}\",{},{},{}\n", r.label, r.mean, r.stderr, r.dev_rmse.len());
    }
    out.write("sweep.csv", &csv)?;
    out.write("sweep.json", serde_json::to_string_pretty(&rows)? + "\n")?;
    out.finish(
        "sweep",
        Some(base.train.seed),
        serde_json::json!({ "axis": a.axis, "full": a.full, "points": points }),
        &inputs,
    )?;
    for r in &rows {
        println!("{:<40} {:.4} ± {:.4}", r.label, r.mean, r.stderr);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckSummary {
    pub seeds: u64,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Gradient check of the preset architecture on random short inputs, one
/// freshly initialized model per seed.
pub fn run_gradcheck(model: &ModelConfig, seeds: u64, tolerance: f64) -> crate::Result<GradcheckSummary> {
    let gc = GradCheckConfig {
        tolerance,
        ..GradCheckConfig::default()
    };
    let reports = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = synthetic_sequence(&mut rng, model.vocab_size, model.seq_len);
            let target = rng.random_range(0..model.num_grades);
            JokeMeter::new(model.clone(), seed)?.grad_check(&seq, target, gc)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckSummary {
        seeds,
        checked: reports.iter().map(|r| r.checked).sum(),
        skipped_kinks: reports.iter().map(|r| r.skipped_kinks).sum(),
        max_rel_error,
        tolerance,
        passed: reports.iter().all(|r| r.passed),
    })
}

pub fn cmd_gradcheck(global: &GlobalArgs, a: &GradcheckArgs) -> anyhow::Result<GradcheckSummary> {
    let mut cfg = resolve(global, a.preset)?;
    cfg.model.vocab_size = a.vocab_size;
    cfg.model.seq_len = a.seq_len;
    let summary = run_gradcheck(&cfg.model, a.seeds, a.tolerance)?;
    let mut out = Outputs::new(&global.out_dir)?;
    out.write("gradcheck.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    out.finish("gradcheck", None, &cfg.model, &[])?;
    println!(
        "checked {} coordinates ({} skipped at kinks), max relative error {:.3e}",
        summary.checked, summary.skipped_kinks, summary.max_rel_error
    );
    if !summary.passed {
        bail!("gradient check failed: {:.3e} ≥ {:.1e}", summary.max_rel_error, summary.tolerance);
    }
    Ok(summary)
}

fn configure_threads(global: &GlobalArgs) {
    if let Some(n) = global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads(&cli.global);
    let g = &cli.global;
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(g, a).map(drop),
        Command::Train(a) => cmd_train(g, a).map(drop),
        Command::Predict(a) => cmd_predict(g, a).map(drop),
        Command::Score(a) => cmd_score(g, a).map(drop),
        Command::Baseline(a) => cmd_baseline(g, a).map(drop),
        Command::Sweep(a) => cmd_sweep(g, a).map(drop),
        Command::Gradcheck(a) => cmd_gradcheck(g, a).map(drop),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_exact_fields() {
        let j = RunConfig::preset(Preset::Jokemeter);
        assert_eq!(
            (j.model.filters_per_region, j.model.embedding_dim, j.model.use_edit_embedding),
            (2, 128, true)
        );
        assert_eq!((j.train.batch_size, j.train.learning_rate), (16, 1e-5));
        let b = RunConfig::preset(Preset::JokemeterBoosted);
        assert_eq!(
            (b.model.filters_per_region, b.model.embedding_dim, b.model.use_edit_embedding),
            (2048, 2048, false)
        );
        assert_eq!((b.train.batch_size, b.train.learning_rate), (64, 1e-5));
    }

    #[test]
    fn unknown_preset_is_rejected() {
        let r = Cli::try_parse_from(["jokemeter", "train", "--train", "a", "--dev", "b", "--preset", "jokemeter-xl"]);
        assert!(r.is_err());
    }

    #[test]
    fn toml_overlay_keeps_unset_fields() {
        let cfg = RunConfig::preset(Preset::Jokemeter)
            .overlay_toml("[model]\nembedding_dim = 16\n[train]\npatience = 2\n")
            .unwrap();
        assert_eq!(cfg.model.embedding_dim, 16);
        assert_eq!(cfg.model.filters_per_region, 2);
        assert_eq!(cfg.train.patience, 2);
        assert_eq!(cfg.train.batch_size, 16);
        assert!(RunConfig::default().overlay_toml("[model]\nbogus = 1\n").is_err());
    }

    #[test]
    fn sweep_grids() {
        let base = RunConfig::preset(Preset::Jokemeter);
        let emb = sweep_points(SweepAxis::EmbeddingDim, &base, false, None);
        assert_eq!(
            emb.iter().map(|p| p.model.embedding_dim).collect::<Vec<_>>(),
            EMBEDDING_GRID
        );
        assert_eq!(sweep_points(SweepAxis::Ablation, &base, false, None).len(), 3);
        assert_eq!(sweep_points(SweepAxis::BatchLr, &base, false, None).len(), 18);
        let full = sweep_points(SweepAxis::FiltersPerRegion, &base, true, None);
        assert_eq!(full.last().unwrap().model.filters_per_region, 2048);
        let capped = sweep_points(SweepAxis::FiltersPerRegion, &base, false, None);
        assert!(capped.iter().all(|p| p.model.filters_per_region <= 64));
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_stderr(&[4.0]), (4.0, 0.0));
    }
}
