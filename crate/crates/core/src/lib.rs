//! Funniness grading for edited news headlines.
//!
//! A headline has one word replaced by an edit, and annotators grade the
//! result from 0 (not funny) to 3 (funny). This crate regresses the grade
//! with a small text CNN whose gradients are computed by its own reverse-mode
//! tape, and decides which of two edits of the same headline is funnier.
//!
//! Modules:
//!
//! - [`corpus`]: strict CSV readers and writers for single edits and pairs.
//! - [`textprep`]: byte-pair vocabulary and input assembly with edit spans.
//! - [`tensor`]: dense tensors, the autodiff tape, AdamW and gradient checks.
//! - [`model`]: the CNN, grade readout, pair decision and checkpoints.
//! - [`trainer`]: instance regimes, shuffled mini-batches and early stopping.
//! - [`baselines`]: TF-IDF tree, linear SVM, kNN and naive Bayes.
//! - [`analysis`]: dataset statistics and pooled-feature correlations.
//! - [`evalio`]: RMSE, accuracy and `id,pred` prediction files.
//! - [`cli`]: the command harness behind the `jokemeter` binary.
//!
//! The `examples/` directory has one runnable program per capability:
//! `autodiff_basics`, `tokenizer`, `analyze_corpus`, `train_planted`,
//! `predict_and_score`, `baselines_grid`, `sweep_ablation`, `gradcheck`,
//! `feature_correlations` and `cli_pipeline`.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evalio;
pub mod model;
pub mod tensor;
pub mod textprep;
pub mod trainer;

pub use error::{Error, Result};
