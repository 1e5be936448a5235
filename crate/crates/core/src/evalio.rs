//! Scoring (RMSE for grades, accuracy for pair labels) and `id,pred` files.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, EditPair, HeadlineEdit, PairLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Task1,
    Task2,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "task1" | "task-1" => Ok(Task::Task1),
            "2" | "task2" | "task-2" => Ok(Task::Task2),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub task: Task,
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

impl ScoreCard {
    pub fn rmse(value: f64, n: usize) -> Self {
        ScoreCard {
            task: Task::Task1,
            metric: "rmse".into(),
            value,
            n,
        }
    }

    pub fn accuracy(value: f64, n: usize) -> Self {
        ScoreCard {
            task: Task::Task2,
            metric: "accuracy".into(),
            value,
            n,
        }
    }
}

impl std::fmt::Display for ScoreCard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {:.6} (n = {})", self.metric, self.value, self.n)
    }
}

/// Root-mean-square error over position-paired slices.
pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::shape("rmse", format!("{} predictions vs {} truths", preds.len(), truths.len())));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput { op: "rmse" });
    }
    let sse: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / preds.len() as f64).sqrt())
}

/// Fraction of correct labels. Gold ties are not scored, as in the official
/// pairwise evaluation; if only ties remain the result is an error.
pub fn accuracy(preds: &[PairLabel], truths: &[PairLabel]) -> Result<f64> {
    Ok(accuracy_counts(preds, truths)?.0)
}

fn accuracy_counts(preds: &[PairLabel], truths: &[PairLabel]) -> Result<(f64, usize)> {
    if preds.len() != truths.len() {
        return Err(Error::shape("accuracy", format!("{} predictions vs {} truths", preds.len(), truths.len())));
    }
    let (mut n, mut hit) = (0usize, 0usize);
    for (p, t) in preds.iter().zip(truths) {
        if *t == PairLabel::Tie {
            continue;
        }
        n += 1;
        hit += usize::from(p == t);
    }
    if n == 0 {
        return Err(Error::EmptyInput { op: "accuracy" });
    }
    Ok((hit as f64 / n as f64, n))
}

fn join<'a, T: Copy, G>(
    preds: &[(String, T)],
    gold: impl Iterator<Item = (&'a str, G)>,
) -> Result<(Vec<T>, Vec<G>)> {
    let mut by_id: HashMap<&str, T> = HashMap::with_capacity(preds.len());
    for (id, p) in preds {
        if by_id.insert(id.as_str(), *p).is_some() {
            return Err(Error::IdMismatch(format!("duplicate prediction id `{id}`")));
        }
    }
    let (mut p_out, mut g_out) = (Vec::new(), Vec::new());
    for (id, g) in gold {
        match by_id.remove(id) {
            Some(p) => {
                p_out.push(p);
                g_out.push(g);
            }
            None => return Err(Error::IdMismatch(format!("no prediction for id `{id}`"))),
        }
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::IdMismatch(format!("prediction for unknown id `{extra}`")));
    }
    Ok((p_out, g_out))
}

/// Task 1 score joined on id against the gold mean grades.
pub fn score_task1(preds: &[(String, f64)], gold: &Dataset<HeadlineEdit>) -> Result<ScoreCard> {
    let (p, t) = join(preds, gold.iter().map(|h| (h.id.as_str(), h.mean_grade)))?;
    Ok(ScoreCard::rmse(rmse(&p, &t)?, p.len()))
}

/// Task 2 score joined on id. Gold pairs without a label are an error.
pub fn score_task2(preds: &[(String, PairLabel)], gold: &Dataset<EditPair>) -> Result<ScoreCard> {
    let labels = gold
        .iter()
        .map(|p| {
            p.label
                .map(|l| (p.id.as_str(), l))
                .ok_or_else(|| Error::IdMismatch(format!("gold pair `{}` has no label", p.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (p, t) = join(preds, labels.into_iter())?;
    let (acc, n) = accuracy_counts(&p, &t)?;
    Ok(ScoreCard::accuracy(acc, n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Task1(Vec<(String, f64)>),
    Task2(Vec<(String, PairLabel)>),
}

impl Predictions {
    pub fn task(&self) -> Task {
        match self {
            Predictions::Task1(_) => Task::Task1,
            Predictions::Task2(_) => Task::Task2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Predictions::Task1(v) => v.len(),
            Predictions::Task2(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const PREDICTION_HEADER: &str = "id,pred";

/// Writes `id,pred` lines. Grades use the shortest representation that
/// parses back to the same `f64`.
pub fn write_predictions<W: Write>(mut w: W, preds: &Predictions) -> Result<()> {
    let io = |e| Error::io("<predictions>", e);
    writeln!(w, "{PREDICTION_HEADER}").map_err(io)?;
    match preds {
        Predictions::Task1(v) => {
            for (id, p) in v {
                writeln!(w, "{id},{p}").map_err(io)?;
            }
        }
        Predictions::Task2(v) => {
            for (id, l) in v {
                writeln!(w, "{id},{}", l.as_digit()).map_err(io)?;
            }
        }
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R, task: Task, origin: &str) -> Result<Predictions> {
    let bad = |line: usize, reason: String| Error::MalformedPrediction {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if !saw_header {
            if line.trim() != PREDICTION_HEADER {
                return Err(bad(lineno, format!("expected header `{PREDICTION_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (id, pred) = line
            .split_once(',')
            .ok_or_else(|| bad(lineno, "expected `id,pred`".into()))?;
        if id.is_empty() || pred.contains(',') {
            return Err(bad(lineno, "expected exactly two non-empty fields".into()));
        }
        match task {
            Task::Task1 => {
                let v: f64 = pred
                    .parse()
                    .map_err(|_| bad(lineno, format!("`{pred}` is not a number")))?;
                if !v.is_finite() {
                    return Err(bad(lineno, format!("`{pred}` is not finite")));
                }
                t1.push((id.to_string(), v));
            }
            Task::Task2 => {
                let l = pred
                    .parse::<u8>()
                    .ok()
                    .and_then(PairLabel::from_digit)
                    .filter(|l| *l != PairLabel::Tie)
                    .ok_or_else(|| bad(lineno, format!("`{pred}` is not a pair label (1 or 2)")))?;
                t2.push((id.to_string(), l));
            }
        }
    }
    if !saw_header {
        return Err(bad(1, "empty file".into()));
    }
    Ok(match task {
        Task::Task1 => Predictions::Task1(t1),
        Task::Task2 => Predictions::Task2(t2),
    })
}

pub fn save_predictions(path: impl AsRef<Path>, preds: &Predictions) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_predictions(&mut w, preds)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: impl AsRef<Path>, task: Task) -> Result<Predictions> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(std::io::BufReader::new(file), task, &path.display().to_string())
}
