//! Correlates every pooled conv feature of a trained model with the funniness
//! grades and lists the strongest ones.
//!
//! ```text
//! cargo run --release --example feature_correlations
//! ```

use jokemeter::analysis::feature_correlation_report;
use jokemeter::corpus::{parse_task1_file, ParseOptions};
use jokemeter::model::ModelConfig;
use jokemeter::textprep::{model_input, train_vocab};
use jokemeter::trainer::{train, TrainConfig};

fn main() -> jokemeter::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/planted/task1.csv");
    let ds = parse_task1_file(path, ParseOptions::default())?;
    let mut cfg = ModelConfig {
        filters_per_region: 8,
        ..ModelConfig::jokemeter()
    };
    let vocab = train_vocab(ds.iter().map(|h| model_input(h, cfg.lowercase)), cfg.vocab_size)?;
    cfg.vocab_size = vocab.len();
    let tcfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 15,
        ..TrainConfig::default()
    };
    let (model, _) = train(&cfg, &tcfg, &vocab, &ds, &ds, None)?;

    let table = feature_correlation_report(&model, &vocab, &ds.records)?;
    let mut rows: Vec<_> = table.per_sample.iter().filter(|f| f.spearman.is_some()).collect();
    rows.sort_by(|a, b| b.spearman.unwrap().abs().total_cmp(&a.spearman.unwrap().abs()));
    println!("{} samples; strongest pooled features by |r_s| against the mean grade:", table.n_samples);
    for f in rows.iter().take(8) {
        println!(
            "  region {} filter {:>2}  sigma {:.4}  r_s {:+.3}",
            f.region_size,
            f.filter,
            f.sigma,
            f.spearman.unwrap()
        );
    }
    Ok(())
}
