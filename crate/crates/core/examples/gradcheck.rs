//! Finite-difference check of every parameter gradient of the full network on
//! short random inputs.
//!
//! ```text
//! cargo run --release --example gradcheck [seeds]
//! ```

use jokemeter::cli::run_gradcheck;
use jokemeter::model::ModelConfig;

fn main() -> jokemeter::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = ModelConfig {
        vocab_size: 64,
        seq_len: 16,
        ..ModelConfig::jokemeter()
    };
    let s = run_gradcheck(&cfg, seeds, 1e-4)?;
    println!(
        "{} seeds: {} coordinates, {} skipped at kinks, max relative error {:.3e} -> {}",
        s.seeds,
        s.checked,
        s.skipped_kinks,
        s.max_rel_error,
        if s.passed { "ok" } else { "FAILED" }
    );
    Ok(())
}
