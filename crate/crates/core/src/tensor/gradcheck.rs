//! Central finite differences against the tape's analytic gradients.

use serde::Serialize;

use super::{NodeId, ParamId, ParamStore, Tape};
use crate::error::Result;

/// One scalar coordinate of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coord {
    pub param: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Relative errors divide by `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates whose perturbation changed a pooling winner or an
    /// activation side; finite differences are meaningless there.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<Coord>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Every coordinate of the given parameters.
pub fn all_coords(store: &ParamStore, params: &[ParamId]) -> Vec<Coord> {
    params
        .iter()
        .flat_map(|&p| (0..store.get(p).tensor.len()).map(move |index| Coord { param: p.0, index }))
        .collect()
}

/// Every coordinate in the listed rows of a 2-D parameter.
pub fn row_coords(store: &ParamStore, param: ParamId, rows: &[usize]) -> Vec<Coord> {
    let width = store.get(param).tensor.shape()[1];
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    rows.iter()
        .flat_map(|&r| (r * width..(r + 1) * width).map(move |index| Coord { param: param.0, index }))
        .collect()
}

/// Compares analytic and central-difference gradients of the scalar built by
/// `forward` at the given coordinates. Leaves parameter values unchanged and
/// gradients holding the analytic result.
pub fn grad_check<F>(store: &mut ParamStore, coords: &[Coord], cfg: GradCheckConfig, forward: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(Tape, NodeId)>,
{
    store.zero_grad();
    let (tape, loss) = forward(store)?;
    let base_print = tape.fingerprint(store);
    tape.backward(loss, store)?;
    drop(tape);

    let probe = |store: &ParamStore| -> Result<(f64, u64)> {
        let (tape, loss) = forward(store)?;
        Ok((tape.value(loss, store).data()[0], tape.fingerprint(store)))
    };

    let mut report = GradCheckReport {
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
        worst: None,
        tolerance: cfg.tolerance,
        passed: true,
    };
    for &c in coords {
        let pid = ParamId(c.param);
        let analytic = store.get(pid).gradient.data()[c.index];
        let orig = store.get(pid).tensor.data()[c.index];

        store.get_mut(pid).tensor.data_mut()[c.index] = orig + cfg.step;
        let plus = probe(store);
        store.get_mut(pid).tensor.data_mut()[c.index] = orig - cfg.step;
        let minus = probe(store);
        store.get_mut(pid).tensor.data_mut()[c.index] = orig;
        let ((lp, fp), (lm, fm)) = (plus?, minus?);

        if fp != base_print || fm != base_print {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * cfg.step);
        let denom = analytic.abs().max(numeric.abs()).max(cfg.floor);
        let rel = (analytic - numeric).abs() / denom;
        report.checked += 1;
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst = Some(c);
        }
    }
    report.passed = report.max_rel_error < cfg.tolerance;
    Ok(report)
}
