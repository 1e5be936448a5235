//! Dataset statistics for a Task 1 file: oracle and constant-grade RMSE,
//! the mean-grade histogram and grade counts per annotator position.
//!
//! ```text
//! cargo run --example analyze_corpus [path/to/task1.csv]
//! ```

use jokemeter::analysis::AnalysisReport;
use jokemeter::corpus::{parse_task1_file, ParseOptions};

fn main() -> jokemeter::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini/task1_train.csv").to_string());
    let ds = parse_task1_file(&path, ParseOptions::default())?;
    let report = AnalysisReport::compute("train", &ds.records)?;
    print!("{}", report.to_text());
    Ok(())
}
