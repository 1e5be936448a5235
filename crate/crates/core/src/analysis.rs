//! Dataset statistics and the pooled-feature study.
//!
//! * oracle RMSE of "always predict the grade at position p"
//! * RMSE of constant grade predictors
//! * the mean-grade histogram and the per-position grade counts
//! * standard deviation and Spearman correlation of each pooled feature

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{HeadlineEdit, GRADES_KEPT, MAX_GRADE};
use crate::error::{Error, Result};
use crate::model::JokeMeter;
use crate::textprep::Vocab;

pub const NUM_GRADES: usize = MAX_GRADE as usize + 1;
pub const HISTOGRAM_BINS: usize = 11;
pub const BIN_WIDTH: f64 = 0.3;

fn nonempty(ds: &[HeadlineEdit], op: &'static str) -> Result<()> {
    if ds.is_empty() {
        Err(Error::EmptyInput { op })
    } else {
        Ok(())
    }
}

fn rms(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    (it.map(|d| d * d).sum::<f64>() / n as f64).sqrt()
}

/// RMSE of the oracle that predicts the grade at 1-based `position`.
pub fn oracle_position_rmse(ds: &[HeadlineEdit], position: usize) -> Result<f64> {
    if !(1..=GRADES_KEPT).contains(&position) {
        return Err(Error::Config(format!("position {position} outside 1..={GRADES_KEPT}")));
    }
    nonempty(ds, "oracle_position_rmse")?;
    Ok(rms(ds.iter().map(|h| f64::from(h.grades[position - 1]) - h.mean_grade), ds.len()))
}

/// RMSE of always predicting grade `g`.
pub fn constant_grade_rmse(ds: &[HeadlineEdit], g: u8) -> Result<f64> {
    if g > MAX_GRADE {
        return Err(Error::Config(format!("grade {g} outside 0..={MAX_GRADE}")));
    }
    nonempty(ds, "constant_grade_rmse")?;
    Ok(rms(ds.iter().map(|h| f64::from(g) - h.mean_grade), ds.len()))
}

/// Left-inclusive bins of width 0.3 over `[0, 3)`, plus a final bin for 3.0.
///
/// Mean grades are ratios of small integers, so `0.6 / 0.3` must land in bin
/// 2 even though it evaluates to 1.999…; a 1e-9 nudge absorbs that.
pub fn histogram_bin(mean: f64) -> usize {
    if mean >= f64::from(MAX_GRADE) - 1e-9 {
        return HISTOGRAM_BINS - 1;
    }
    ((mean / BIN_WIDTH + 1e-9).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 2)
}

pub fn bin_label(bin: usize) -> String {
    if bin == HISTOGRAM_BINS - 1 {
        "3.0".to_string()
    } else {
        format!("[{:.1},{:.1})", bin as f64 * BIN_WIDTH, (bin + 1) as f64 * BIN_WIDTH)
    }
}

/// `rows[p][g]` counts grade `g` at 0-based position `p`; `any` sums positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PositionCounts {
    pub rows: [[usize; NUM_GRADES]; GRADES_KEPT],
    pub any: [usize; NUM_GRADES],
}

pub fn histogram_and_position_counts(ds: &[HeadlineEdit]) -> ([usize; HISTOGRAM_BINS], PositionCounts) {
    let mut bins = [0usize; HISTOGRAM_BINS];
    let mut counts = PositionCounts {
        rows: [[0; NUM_GRADES]; GRADES_KEPT],
        any: [0; NUM_GRADES],
    };
    for h in ds {
        bins[histogram_bin(h.mean_grade)] += 1;
        for (p, &g) in h.grades.iter().enumerate() {
            counts.rows[p][usize::from(g)] += 1;
            counts.any[usize::from(g)] += 1;
        }
    }
    (bins, counts)
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation, or `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::shape("spearman", format!("lengths {} and {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput { op: "spearman" });
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStat {
    pub region_size: usize,
    pub filter: usize,
    pub sigma: f64,
    pub spearman: Option<f64>,
}

/// One row per pooled feature, correlated two ways: against each sample's
/// mean grade, and against every individual grade (five instances per sample).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTable {
    pub n_samples: usize,
    pub n_expanded: usize,
    pub per_sample: Vec<FeatureStat>,
    pub expanded: Vec<FeatureStat>,
}

/// Builds the table from precomputed features; `labels[i]` names column `i`.
pub fn feature_table(features: &[Vec<f64>], ds: &[HeadlineEdit], labels: &[(usize, usize)]) -> Result<FeatureTable> {
    if features.len() != ds.len() {
        return Err(Error::shape("feature_table", format!("{} feature rows for {} samples", features.len(), ds.len())));
    }
    if let Some(row) = features.iter().find(|f| f.len() != labels.len()) {
        return Err(Error::shape("feature_table", format!("row width {} vs {} labels", row.len(), labels.len())));
    }
    let means: Vec<f64> = ds.iter().map(|h| h.mean_grade).collect();
    let grades: Vec<f64> = ds.iter().flat_map(|h| h.grades.iter().map(|&g| f64::from(g))).collect();
    let mut per_sample = Vec::with_capacity(labels.len());
    let mut expanded = Vec::with_capacity(labels.len());
    for (j, &(region_size, filter)) in labels.iter().enumerate() {
        let col: Vec<f64> = features.iter().map(|f| f[j]).collect();
        let sigma = population_std(&col);
        let rep: Vec<f64> = col.iter().flat_map(|&v| std::iter::repeat_n(v, GRADES_KEPT)).collect();
        let corr = |xs: &[f64], ys: &[f64]| -> Result<Option<f64>> {
            if xs.len() < 2 {
                Ok(None)
            } else {
                spearman(xs, ys)
            }
        };
        per_sample.push(FeatureStat {
            region_size,
            filter,
            sigma,
            spearman: corr(&col, &means)?,
        });
        expanded.push(FeatureStat {
            region_size,
            filter,
            sigma,
            spearman: corr(&rep, &grades)?,
        });
    }
    Ok(FeatureTable {
        n_samples: ds.len(),
        n_expanded: grades.len(),
        per_sample,
        expanded,
    })
}

/// Runs the model over `ds` and tabulates every pooled conv feature.
pub fn feature_correlation_report(model: &JokeMeter, vocab: &Vocab, ds: &[HeadlineEdit]) -> Result<FeatureTable> {
    let cfg = model.config();
    let labels: Vec<(usize, usize)> = if cfg.use_conv_features {
        cfg.region_sizes
            .iter()
            .flat_map(|&r| (0..cfg.filters_per_region).map(move |f| (r, f)))
            .collect()
    } else {
        Vec::new()
    };
    let features = model.pooled_features(vocab, ds)?;
    feature_table(&features, ds, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub name: String,
    pub n: usize,
    pub oracle_rmse: [f64; GRADES_KEPT],
    pub constant_rmse: [f64; NUM_GRADES],
    pub histogram: [usize; HISTOGRAM_BINS],
    pub position_counts: PositionCounts,
    pub features: Option<FeatureTable>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl AnalysisReport {
    pub fn compute(name: impl Into<String>, ds: &[HeadlineEdit]) -> Result<Self> {
        nonempty(ds, "analysis")?;
        let mut oracle_rmse = [0.0; GRADES_KEPT];
        for (p, slot) in oracle_rmse.iter_mut().enumerate() {
            *slot = oracle_position_rmse(ds, p + 1)?;
        }
        let mut constant_rmse = [0.0; NUM_GRADES];
        for (g, slot) in constant_rmse.iter_mut().enumerate() {
            *slot = constant_grade_rmse(ds, g as u8)?;
        }
        let (histogram, position_counts) = histogram_and_position_counts(ds);
        Ok(AnalysisReport {
            name: name.into(),
            n: ds.len(),
            oracle_rmse,
            constant_rmse,
            histogram,
            position_counts,
            features: None,
        })
    }

    pub fn with_features(mut self, table: FeatureTable) -> Self {
        self.features = Some(table);
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset: {} (n = {})", self.name, self.n);
        let _ = writeln!(s, "\noracle RMSE by grade position");
        for (p, v) in self.oracle_rmse.iter().enumerate() {
            let _ = writeln!(s, "  {}  {v:.3}", p + 1);
        }
        let _ = writeln!(s, "\nconstant-grade RMSE");
        for (g, v) in self.constant_rmse.iter().enumerate() {
            let _ = writeln!(s, "  {g}  {v:.3}");
        }
        let _ = writeln!(s, "\nmean-grade histogram (left-inclusive bins)");
        for (b, c) in self.histogram.iter().enumerate() {
            let _ = writeln!(s, "  {:<10} {c}", bin_label(b));
        }
        let _ = writeln!(s, "\ngrade counts by position (columns: grade 0..3)");
        for (p, row) in self.position_counts.rows.iter().enumerate() {
            let _ = writeln!(s, "  {:<4} {}", p + 1, join_counts(row));
        }
        let _ = writeln!(s, "  {:<4} {}", "any", join_counts(&self.position_counts.any));
        if let Some(t) = &self.features {
            let _ = writeln!(
                s,
                "\npooled features: population std; Spearman vs mean grade (n = {}) and vs individual grades (n = {}); '-' = zero variance; no p-values",
                t.n_samples, t.n_expanded
            );
            for (a, b) in t.per_sample.iter().zip(&t.expanded) {
                let _ = writeln!(
                    s,
                    "  region {:<3} filter {:<4} sigma {:.3}  r_s {:>6}  r_s(grades) {:>6}",
                    a.region_size,
                    a.filter,
                    a.sigma,
                    fmt_opt(a.spearman),
                    fmt_opt(b.spearman)
                );
            }
        }
        s
    }

    /// Writes `report.txt`, one CSV per table, and gnuplot `.dat` files.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        put("report.txt", self.to_text())?;
        put("report.json", serde_json::to_string_pretty(self)? + "\n")?;

        let mut csv = String::from("position,rmse\n");
        for (p, v) in self.oracle_rmse.iter().enumerate() {
            let _ = writeln!(csv, "{},{v}", p + 1);
        }
        put("oracle_rmse.csv", csv)?;

        let mut csv = String::from("grade,rmse\n");
        for (g, v) in self.constant_rmse.iter().enumerate() {
            let _ = writeln!(csv, "{g},{v}");
        }
        put("constant_rmse.csv", csv)?;

        let mut csv = String::from("bin,lower,count\n");
        let mut dat = String::from("# bin_lower count\n");
        for (b, c) in self.histogram.iter().enumerate() {
            let lower = b as f64 * BIN_WIDTH;
            let _ = writeln!(csv, "\"{}\",{lower:.1},{c}", bin_label(b));
            let _ = writeln!(dat, "{lower:.1} {c}");
        }
        put("histogram.csv", csv)?;
        put("histogram.dat", dat)?;

        let mut csv = String::from("position,grade0,grade1,grade2,grade3\n");
        let mut dat = String::from("# grade position1 position2 position3 position4 position5 any\n");
        for (p, row) in self.position_counts.rows.iter().enumerate() {
            let _ = writeln!(csv, "{},{}", p + 1, join_counts(row).replace(' ', ","));
        }
        let _ = writeln!(csv, "any,{}", join_counts(&self.position_counts.any).replace(' ', ","));
        for g in 0..NUM_GRADES {
            let cols: Vec<String> = self.position_counts.rows.iter().map(|r| r[g].to_string()).collect();
            let _ = writeln!(dat, "{g} {} {}", cols.join(" "), self.position_counts.any[g]);
        }
        put("position_counts.csv", csv)?;
        put("position_counts.dat", dat)?;

        if let Some(t) = &self.features {
            let mut csv = String::from("region_size,filter,sigma,spearman_mean_grade,spearman_grades\n");
            for (a, b) in t.per_sample.iter().zip(&t.expanded) {
                let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
                let _ = writeln!(csv, "{},{},{},{},{}", a.region_size, a.filter, a.sigma, opt(a.spearman), opt(b.spearman));
            }
            put("features.csv", csv)?;
        }
        Ok(())
    }
}

fn join_counts(row: &[usize]) -> String {
    row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(grades: [u8; 5], mean: f64) -> HeadlineEdit {
        HeadlineEdit::new("x", "a <b/> c", "d", &grades, mean).unwrap()
    }

    #[test]
    fn oracle_single_sample() {
        let ds = [h([3, 2, 1, 1, 0], 1.4)];
        assert!((oracle_position_rmse(&ds, 1).unwrap() - 1.6).abs() < 1e-12);
        assert!(oracle_position_rmse(&ds, 0).is_err());
        assert!(oracle_position_rmse(&ds, 6).is_err());
        let flat = [h([2; 5], 2.0), h([1; 5], 1.0)];
        for p in 1..=5 {
            assert_eq!(oracle_position_rmse(&flat, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_examples() {
        let ds = [h([0; 5], 0.0), h([2; 5], 2.0)];
        assert!((constant_grade_rmse(&ds, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(constant_grade_rmse(&[h([2; 5], 2.0)], 2).unwrap(), 0.0);
        assert!(constant_grade_rmse(&ds, 4).is_err());
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(0.2), 0);
        assert_eq!(histogram_bin(0.6), 2);
        assert_eq!(histogram_bin(0.8), 2);
        assert_eq!(histogram_bin(0.9), 3);
        assert_eq!(histogram_bin(2.8), 9);
        assert_eq!(histogram_bin(3.0), 10);
        assert_eq!(bin_label(2), "[0.6,0.9)");
    }

    #[test]
    fn single_sample_counts_are_one_hot() {
        let (bins, c) = histogram_and_position_counts(&[h([3, 2, 1, 1, 0], 1.4)]);
        assert_eq!(bins.iter().sum::<usize>(), 1);
        assert_eq!(bins[4], 1);
        assert_eq!(c.rows[0], [0, 0, 0, 1]);
        assert_eq!(c.rows[4], [1, 0, 0, 0]);
        assert_eq!(c.any, [1, 2, 1, 1]);
    }

    #[test]
    fn spearman_examples() {
        let up = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&up, &[2.0, 5.0, 7.0, 9.0]).unwrap(), Some(1.0));
        assert_eq!(spearman(&up, &[4.0, 3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        assert!((spearman(&up, &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&up, &[1.0; 4]).unwrap(), None);
        assert!(spearman(&up, &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn feature_table_examples() {
        let ds = [h([0; 5], 0.0), h([1; 5], 1.0), h([3, 2, 2, 1, 1], 1.8)];
        let feats = vec![vec![5.0, 0.0, 1.0], vec![5.0, 1.0, -1.0], vec![5.0, 1.8, -9.0]];
        let t = feature_table(&feats, &ds, &[(2, 0), (2, 1), (3, 0)]).unwrap();
        assert_eq!(t.per_sample[0].sigma, 0.0);
        assert_eq!(t.per_sample[0].spearman, None);
        assert_eq!(t.per_sample[1].spearman, Some(1.0));
        assert_eq!(t.per_sample[2].spearman, Some(-1.0));
        assert_eq!(t.n_expanded, 15);
    }
}
