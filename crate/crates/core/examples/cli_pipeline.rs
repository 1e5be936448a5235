//! Drives the command-line harness in-process: analyze, train, predict and
//! score, all writing into one temporary output tree with manifests.
//!
//! ```text
//! cargo run --release --example cli_pipeline
//! ```

use jokemeter::cli::run_from;

fn main() -> anyhow::Result<()> {
    let mini = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini");
    let (train, dev) = (format!("{mini}/task1_train.csv"), format!("{mini}/task1_dev.csv"));
    let root = std::env::temp_dir().join("jokemeter_cli_pipeline");
    let out = |sub: &str| root.join(sub).display().to_string();
    let jm = |out_dir: String, args: &[&str]| {
        let mut argv = vec!["jokemeter".to_string(), "--out-dir".to_string(), out_dir];
        argv.extend(args.iter().map(|s| s.to_string()));
        run_from(argv)
    };

    jm(out("analyze"), &["analyze", "--train", &train, "--dev", &dev])?;
    jm(
        out("train"),
        &["--seed", "7", "train", "--train", &train, "--dev", &dev, "--embedding-dim", "16", "--lr", "1e-3", "--max-epochs", "5"],
    )?;
    let (ck, vocab) = (format!("{}/model.ckpt", out("train")), format!("{}/vocab.txt", out("train")));
    let preds = format!("{}/predictions.csv", out("predict"));
    jm(out("predict"), &["predict", "--checkpoint", &ck, "--vocab", &vocab, "--data", &dev])?;
    jm(out("score"), &["score", "--task", "1", "--predictions", &preds, "--gold", &dev])?;
    println!("outputs under {}", root.display());
    Ok(())
}
