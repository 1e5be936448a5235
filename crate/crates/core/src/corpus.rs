//! Humicroedit-format datasets.
//!
//! A Task 1 file has the header `id,original,edit,grades,meanGrade`. The
//! `original` column carries the headline with exactly one span marked as
//! `<span/>`, `edit` is the replacement, and `grades` is the descending digit
//! string of annotator grades. Only the first five grades are kept.
//!
//! A Task 2 file pairs two such edits of the same headline:
//! `id,original1,edit1,grades1,meanGrade1,original2,edit2,grades2,meanGrade2[,label]`.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grades kept per record.
pub const GRADES_KEPT: usize = 5;
/// Highest grade an annotator can give.
pub const MAX_GRADE: u8 = 3;

/// Stored means that differ from the first-five mean by more than this are logged.
pub const MEAN_DISCREPANCY_WARN: f64 = 0.21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// The three pieces of a marked headline: text before the span, the span, text after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkedSpan<'a> {
    pub prefix: &'a str,
    pub span: &'a str,
    pub suffix: &'a str,
}

/// Locate the single `<span/>` marker in `original`.
pub fn split_marked(original: &str) -> std::result::Result<MarkedSpan<'_>, String> {
    let close = match original.match_indices("/>").map(|(i, _)| i).collect::<Vec<_>>()[..] {
        [i] => i,
        [] => return Err("no `<…/>` span marker".into()),
        _ => return Err("more than one `/>` span marker".into()),
    };
    let open = original[..close]
        .rfind('<')
        .ok_or_else(|| "span marker has no opening `<`".to_string())?;
    if original[..open].contains('<') || original[close + 2..].contains('<') {
        return Err("more than one `<` span marker".into());
    }
    Ok(MarkedSpan {
        prefix: &original[..open],
        span: &original[open + 1..close],
        suffix: &original[close + 2..],
    })
}

/// One Sub-Task 1 record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineEdit {
    pub id: String,
    pub original: String,
    pub edit: String,
    pub grades: [u8; GRADES_KEPT],
    pub mean_grade: f64,
}

impl HeadlineEdit {
    /// Builds a record and checks every invariant. `grades` may be longer than
    /// five; the tail is dropped.
    pub fn new(
        id: impl Into<String>,
        original: impl Into<String>,
        edit: impl Into<String>,
        grades: &[u8],
        mean_grade: f64,
    ) -> std::result::Result<Self, String> {
        let original = original.into();
        split_marked(&original)?;
        if grades.len() < GRADES_KEPT {
            return Err(format!(
                "need at least {GRADES_KEPT} grades, got {}",
                grades.len()
            ));
        }
        let mut kept = [0u8; GRADES_KEPT];
        kept.copy_from_slice(&grades[..GRADES_KEPT]);
        if let Some(g) = kept.iter().find(|&&g| g > MAX_GRADE) {
            return Err(format!("grade {g} outside 0..=3"));
        }
        if kept.windows(2).any(|w| w[0] < w[1]) {
            return Err("grades are not in descending order".into());
        }
        if !(0.0..=f64::from(MAX_GRADE)).contains(&mean_grade) {
            return Err(format!("mean grade {mean_grade} outside [0,3]"));
        }
        Ok(HeadlineEdit {
            id: id.into(),
            original,
            edit: edit.into(),
            grades: kept,
            mean_grade,
        })
    }

    pub fn marked(&self) -> MarkedSpan<'_> {
        split_marked(&self.original).expect("validated at construction")
    }

    /// The headline with the marked span replaced by the edit.
    pub fn apply_edit(&self) -> String {
        let m = self.marked();
        format!("{}{}{}", m.prefix, self.edit, m.suffix)
    }

    /// The headline as published, markers stripped.
    pub fn unmarked_original(&self) -> String {
        let m = self.marked();
        format!("{}{}{}", m.prefix, m.span, m.suffix)
    }

    pub fn first_five_mean(&self) -> f64 {
        first_five_mean(&self.grades).expect("five grades by construction")
    }
}

pub fn apply_edit(h: &HeadlineEdit) -> String {
    h.apply_edit()
}

/// Arithmetic mean of exactly five grades.
pub fn first_five_mean(grades: &[u8]) -> Result<f64> {
    if grades.len() != GRADES_KEPT {
        return Err(Error::GradeCount {
            expected: GRADES_KEPT,
            got: grades.len(),
        });
    }
    let sum: u32 = grades.iter().map(|&g| u32::from(g)).sum();
    Ok(f64::from(sum) / GRADES_KEPT as f64)
}

/// Which member of a pair annotators found funnier. `Tie` is label `0` in the
/// official files; such pairs are not scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    Tie,
    First,
    Second,
}

impl PairLabel {
    pub fn as_digit(self) -> u8 {
        match self {
            PairLabel::Tie => 0,
            PairLabel::First => 1,
            PairLabel::Second => 2,
        }
    }

    pub fn from_digit(d: u8) -> Option<Self> {
        match d {
            0 => Some(PairLabel::Tie),
            1 => Some(PairLabel::First),
            2 => Some(PairLabel::Second),
            _ => None,
        }
    }
}

/// One Sub-Task 2 record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPair {
    pub id: String,
    pub first: HeadlineEdit,
    pub second: HeadlineEdit,
    pub label: Option<PairLabel>,
}

impl EditPair {
    pub fn new(
        id: impl Into<String>,
        first: HeadlineEdit,
        second: HeadlineEdit,
        label: Option<PairLabel>,
    ) -> std::result::Result<Self, String> {
        if first.unmarked_original() != second.unmarked_original() {
            return Err("the two edits do not share the same original headline".into());
        }
        Ok(EditPair {
            id: id.into(),
            first,
            second,
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub split: Split,
    pub records: Vec<T>,
}

impl<T> Dataset<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.records.iter()
    }
}

impl<'a, T> IntoIterator for &'a Dataset<T> {
    type Item = &'a T;
    type IntoIter = std::slice::Iter<'a, T>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub split: Split,
    /// Skip malformed rows with a warning instead of failing the load.
    pub lenient: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            split: Split::Train,
            lenient: false,
        }
    }
}

impl ParseOptions {
    pub fn split(split: Split) -> Self {
        ParseOptions {
            split,
            ..Default::default()
        }
    }
}

pub const TASK1_HEADER: [&str; 5] = ["id", "original", "edit", "grades", "meanGrade"];
pub const TASK2_HEADER: [&str; 10] = [
    "id",
    "original1",
    "edit1",
    "grades1",
    "meanGrade1",
    "original2",
    "edit2",
    "grades2",
    "meanGrade2",
    "label",
];

fn parse_grades(s: &str) -> std::result::Result<Vec<u8>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty grades field".into());
    }
    s.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as u8)
                .ok_or_else(|| format!("non-digit grade character `{c}`"))
        })
        .collect()
}

fn parse_mean(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("meanGrade `{s}` is not a number"))?;
    if !(0.0..=f64::from(MAX_GRADE)).contains(&v) {
        return Err(format!("meanGrade {v} outside [0,3]"));
    }
    Ok(v)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

struct Columns {
    idx: Vec<Option<usize>>,
}

impl Columns {
    fn resolve(
        headers: &csv::StringRecord,
        names: &[&str],
        optional: &[&str],
        path: &str,
    ) -> Result<Self> {
        let mut idx = Vec::with_capacity(names.len());
        for name in names {
            let i = column_index(headers, name);
            if i.is_none() && !optional.contains(name) {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    row: 1,
                    reason: format!("missing column `{name}` in header"),
                });
            }
            idx.push(i);
        }
        Ok(Columns { idx })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, col: usize) -> std::result::Result<&'r str, String> {
        match self.idx[col] {
            Some(i) => rec
                .get(i)
                .ok_or_else(|| format!("row has only {} fields", rec.len())),
            None => Ok(""),
        }
    }
}

fn headline_from(
    cols: &Columns,
    rec: &csv::StringRecord,
    id: &str,
    base: usize,
) -> std::result::Result<HeadlineEdit, String> {
    let original = cols.get(rec, base)?;
    let edit = cols.get(rec, base + 1)?;
    let grades = parse_grades(cols.get(rec, base + 2)?)?;
    let mean = parse_mean(cols.get(rec, base + 3)?)?;
    let h = HeadlineEdit::new(id, original, edit, &grades, mean)?;
    let five = h.first_five_mean();
    if (five - h.mean_grade).abs() > MEAN_DISCREPANCY_WARN {
        log::warn!(
            "record {id}: first-five mean {five:.3} differs from stored meanGrade {:.3}",
            h.mean_grade
        );
    }
    Ok(h)
}

/// Shared row loop: strict mode fails on the first bad row, lenient skips it.
fn load_rows<R: Read, T>(
    reader: R,
    path: &str,
    opts: ParseOptions,
    names: &[&str],
    optional: &[&str],
    mut build: impl FnMut(&Columns, &csv::StringRecord) -> std::result::Result<T, String>,
    id_of: impl Fn(&T) -> &str,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers, names, optional, path)?;
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let outcome = rec
            .map_err(|e| e.to_string())
            .and_then(|rec| build(&cols, &rec))
            .and_then(|t| {
                if seen.insert(id_of(&t).to_string()) {
                    Ok(t)
                } else {
                    Err(format!("duplicate id `{}`", id_of(&t)))
                }
            });
        match outcome {
            Ok(t) => records.push(t),
            Err(reason) if opts.lenient => {
                log::warn!("{path}: skipping row {row}: {reason}");
            }
            Err(reason) => {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    row,
                    reason,
                })
            }
        }
    }
    Ok(Dataset {
        split: opts.split,
        records,
    })
}

pub fn read_task1<R: Read>(reader: R, origin: &str, opts: ParseOptions) -> Result<Dataset<HeadlineEdit>> {
    load_rows(
        reader,
        origin,
        opts,
        &TASK1_HEADER,
        &[],
        |cols, rec| {
            let id = cols.get(rec, 0)?.trim();
            headline_from(cols, rec, id, 1)
        },
        |h| &h.id,
    )
}

pub fn parse_task1_file(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Dataset<HeadlineEdit>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_task1(file, &path.display().to_string(), opts)
}

pub fn read_task2<R: Read>(reader: R, origin: &str, opts: ParseOptions) -> Result<Dataset<EditPair>> {
    load_rows(
        reader,
        origin,
        opts,
        &TASK2_HEADER,
        &["label"],
        |cols, rec| {
            let id = cols.get(rec, 0)?.trim();
            // Members get derived ids so they can be scored individually.
            let first = headline_from(cols, rec, &format!("{id}-1"), 1)?;
            let second = headline_from(cols, rec, &format!("{id}-2"), 5)?;
            let label = match cols.get(rec, 9)?.trim() {
                "" => None,
                s => Some(
                    s.parse::<u8>()
                        .ok()
                        .and_then(PairLabel::from_digit)
                        .ok_or_else(|| format!("label `{s}` not in {{0,1,2}}"))?,
                ),
            };
            EditPair::new(id, first, second, label)
        },
        |p| &p.id,
    )
}

pub fn parse_task2_file(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Dataset<EditPair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_task2(file, &path.display().to_string(), opts)
}

fn grade_string(grades: &[u8]) -> String {
    grades.iter().map(|g| char::from(b'0' + g)).collect()
}

pub fn write_task1<W: Write>(writer: W, ds: &Dataset<HeadlineEdit>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TASK1_HEADER)?;
    for h in ds {
        w.write_record([
            h.id.as_str(),
            &h.original,
            &h.edit,
            &grade_string(&h.grades),
            &h.mean_grade.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_task2<W: Write>(writer: W, ds: &Dataset<EditPair>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TASK2_HEADER)?;
    for p in ds {
        let label = p.label.map(|l| l.as_digit().to_string()).unwrap_or_default();
        w.write_record([
            p.id.as_str(),
            &p.first.original,
            &p.first.edit,
            &grade_string(&p.first.grades),
            &p.first.mean_grade.to_string(),
            &p.second.original,
            &p.second.edit,
            &grade_string(&p.second.grades),
            &p.second.mean_grade.to_string(),
            &label,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
