//! Train briefly, write an `id,pred` prediction file, read it back and score
//! it against gold data for both tasks.
//!
//! ```text
//! cargo run --release --example predict_and_score
//! ```

use jokemeter::corpus::{parse_task1_file, parse_task2_file, ParseOptions, Split};
use jokemeter::evalio::{load_predictions, save_predictions, score_task1, score_task2, Predictions, Task};
use jokemeter::model::ModelConfig;
use jokemeter::textprep::{model_input, train_vocab};
use jokemeter::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let mini = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini");
    let train_ds = parse_task1_file(format!("{mini}/task1_train.csv"), ParseOptions::default())?;
    let dev = parse_task1_file(format!("{mini}/task1_dev.csv"), ParseOptions::split(Split::Dev))?;
    let pairs = parse_task2_file(format!("{mini}/task2.csv"), ParseOptions::default())?;

    let mut cfg = ModelConfig {
        embedding_dim: 16,
        filters_per_region: 8,
        ..ModelConfig::jokemeter()
    };
    let vocab = train_vocab(train_ds.iter().map(|h| model_input(h, cfg.lowercase)), cfg.vocab_size)?;
    cfg.vocab_size = vocab.len();
    let tcfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let (model, _) = train(&cfg, &tcfg, &vocab, &train_ds, &dev, None)?;

    let grades = model.predict_many(&vocab, &dev.records)?;
    let preds = Predictions::Task1(dev.iter().map(|h| h.id.clone()).zip(grades).collect());
    let path = std::env::temp_dir().join("jokemeter_task1_predictions.csv");
    save_predictions(&path, &preds)?;
    print!("{}", std::fs::read_to_string(&path)?);
    if let Predictions::Task1(back) = load_predictions(&path, Task::Task1)? {
        println!("{}", score_task1(&back, &dev)?);
    }

    let labels = model.predict_pairs(&vocab, &pairs.records)?;
    let pair_preds: Vec<_> = pairs.iter().map(|p| p.id.clone()).zip(labels).collect();
    println!("{}", score_task2(&pair_preds, &pairs)?);
    Ok(())
}
