//! Every TF-IDF baseline (tree, linear SVM, kNN, naive Bayes) on both feature
//! variants, scored on the planted corpus, plus the constant predictors.
//!
//! ```text
//! cargo run --release --example baselines_grid
//! ```

use jokemeter::baselines::{constant_baselines, BaselineConfig, BaselineKind, BaselineModel, FeatureVariant};
use jokemeter::corpus::{parse_task1_file, parse_task2_file, ParseOptions};
use jokemeter::evalio::{accuracy, rmse};
use jokemeter::trainer::Regime;

fn main() -> jokemeter::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/planted");
    let ds = parse_task1_file(format!("{data}/task1.csv"), ParseOptions::default())?;
    let pairs = parse_task2_file(format!("{data}/task2.csv"), ParseOptions::default())?;
    let truth: Vec<f64> = ds.iter().map(|h| h.mean_grade).collect();
    let gold: Vec<_> = pairs.iter().filter_map(|p| p.label).collect();
    let cfg = BaselineConfig::default();

    println!("{:<5} {:<15} {:>8} {:>9}", "kind", "features", "RMSE", "accuracy");
    for kind in BaselineKind::ALL {
        for variant in FeatureVariant::ALL {
            let model = BaselineModel::fit(kind, variant, Regime::AllGrades, &cfg, &ds.records)?;
            let grades: Vec<f64> = model.predict_many_task1(&ds.records).into_iter().map(f64::from).collect();
            let labels = model.predict_many_task2(&pairs.records);
            println!(
                "{:<5} {:<15} {:>8.4} {:>9.3}",
                kind.to_string(),
                variant.to_string(),
                rmse(&grades, &truth)?,
                accuracy(&labels, &gold)?
            );
        }
    }

    let c = constant_baselines(&ds.records, Some(&pairs.records))?;
    println!(
        "constant: mean grade {:.4} (RMSE {:.4}), most frequent label {:?}",
        c.mean_grade,
        rmse(&vec![c.mean_grade; truth.len()], &truth)?,
        c.most_frequent_label
    );
    Ok(())
}
