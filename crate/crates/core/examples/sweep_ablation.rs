//! Component ablation: conv features only, edit embedding only, and both,
//! each trained over a few seeds with the mean and standard error reported.
//!
//! ```text
//! cargo run --release --example sweep_ablation
//! ```

use jokemeter::cli::{mean_stderr, sweep_points, Preset, RunConfig, SweepAxis};
use jokemeter::corpus::{parse_task1_file, ParseOptions, Split};
use jokemeter::textprep::{model_input, train_vocab};
use jokemeter::trainer::train;

fn main() -> jokemeter::Result<()> {
    let mini = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini");
    let train_ds = parse_task1_file(format!("{mini}/task1_train.csv"), ParseOptions::default())?;
    let dev = parse_task1_file(format!("{mini}/task1_dev.csv"), ParseOptions::split(Split::Dev))?;

    let mut base = RunConfig::preset(Preset::Jokemeter);
    base.model.embedding_dim = 16;
    base.model.filters_per_region = 8;
    base.train.learning_rate = 1e-3;
    base.train.max_epochs = 8;
    let vocab = train_vocab(train_ds.iter().map(|h| model_input(h, base.model.lowercase)), base.model.vocab_size)?;
    base.model.vocab_size = vocab.len();

    for point in sweep_points(SweepAxis::Ablation, &base, false, None) {
        let mut devs = Vec::new();
        for seed in 0..3 {
            let mut tcfg = point.train.clone();
            tcfg.seed = seed;
            let (_, report) = train(&point.model, &tcfg, &vocab, &train_ds, &dev, None)?;
            devs.push(report.best_dev_rmse);
        }
        let (mean, se) = mean_stderr(&devs);
        println!("{:<34} dev RMSE {mean:.4} ± {se:.4}", point.label);
    }
    Ok(())
}
