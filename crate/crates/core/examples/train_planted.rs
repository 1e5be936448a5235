//! Trains the CNN on a corpus whose funniness is fully determined by the
//! edit word, then checks that the pair decisions come out right.
//!
//! ```text
//! cargo run --release --example train_planted
//! ```

use jokemeter::corpus::{parse_task1_file, parse_task2_file, ParseOptions};
use jokemeter::evalio::accuracy;
use jokemeter::model::{Checkpoint, ModelConfig};
use jokemeter::textprep::{model_input, train_vocab};
use jokemeter::trainer::{train, TrainConfig};

fn main() -> jokemeter::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/planted");
    let ds = parse_task1_file(format!("{data}/task1.csv"), ParseOptions::default())?;
    let pairs = parse_task2_file(format!("{data}/task2.csv"), ParseOptions::default())?;

    let mut model_cfg = ModelConfig::jokemeter();
    let vocab = train_vocab(ds.iter().map(|h| model_input(h, model_cfg.lowercase)), model_cfg.vocab_size)?;
    model_cfg.vocab_size = vocab.len();
    let train_cfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 40,
        patience: 40,
        ..TrainConfig::default()
    };

    let (model, report) = train(&model_cfg, &train_cfg, &vocab, &ds, &ds, None)?;
    for e in report.epochs.iter().step_by(5) {
        println!("epoch {:>3}  train loss {:.4}  dev RMSE {:.4}", e.epoch, e.train_loss, e.dev_rmse);
    }
    println!("best epoch {} with RMSE {:.4}", report.best_epoch, report.best_dev_rmse);

    let predicted = model.predict_pairs(&vocab, &pairs.records)?;
    let gold: Vec<_> = pairs.iter().filter_map(|p| p.label).collect();
    println!("pair accuracy {:.3} over {} pairs", accuracy(&predicted, &gold)?, gold.len());

    let path = std::env::temp_dir().join("jokemeter_planted.ckpt");
    Checkpoint::new(model, vocab.content_hash()).save(&path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
