//! Functional depth of Betti curves: modified band depth, pivots and rolling depth.
//!
//! Depth measures are trait objects so that a different functional depth can
//! be swapped in by name; [`depth_registry`] lists the built-in ones.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::homology::BettiCurve;
use crate::registry::{Named, Registry};

/// Default rolling window, in days.
pub const DEFAULT_WINDOW: usize = 7;

/// A functional depth of step curves relative to a reference collection.
pub trait DepthMeasure: Named + Send + Sync {
    /// Depth of each subject with respect to `collection`. Values lie in `[0, 1]`.
    fn depths(&self, subjects: &[&BettiCurve], collection: &[&BettiCurve]) -> Result<Vec<f64>>;

    fn depth(&self, subject: &BettiCurve, collection: &[&BettiCurve]) -> Result<f64> {
        Ok(self.depths(&[subject], collection)?[0])
    }
}

/// Modified band depth, computed exactly over the merged breakpoints of all
/// curves involved.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModifiedBandDepth {
    /// Also count the degenerate bands `(y_i, y_i)`. The normaliser becomes
    /// `m(m+1)/2` so scores stay in `[0, 1]`.
    pub include_self_pairs: bool,
}

impl Named for ModifiedBandDepth {
    fn name(&self) -> &'static str {
        if self.include_self_pairs {
            "mbd-self-pairs"
        } else {
            "mbd"
        }
    }
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

fn check_compatible(curves: &[&BettiCurve]) -> Result<(usize, f64)> {
    let first = curves
        .first()
        .ok_or_else(|| Error::domain("empty curve collection"))?;
    let (dim, cap) = (first.dim(), first.scale_cap());
    if curves
        .iter()
        .any(|c| c.dim() != dim || c.scale_cap() != cap)
    {
        return Err(Error::domain("curves must share dimension and domain"));
    }
    Ok((dim, cap))
}

/// Sweeps the elementary intervals of the merged breakpoint set, calling
/// `visit(length, values)` with every curve's value on that interval.
fn sweep(curves: &[&BettiCurve], cap: f64, mut visit: impl FnMut(f64, &[usize])) {
    let mut grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.breakpoints().iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut cursor = vec![0usize; curves.len()];
    let mut values = vec![0usize; curves.len()];
    for (k, &x) in grid.iter().enumerate() {
        let end = grid.get(k + 1).copied().unwrap_or(cap);
        let len = end - x;
        if len <= 0.0 {
            continue;
        }
        for (i, c) in curves.iter().enumerate() {
            let bp = c.breakpoints();
            while cursor[i] + 1 < bp.len() && bp[cursor[i] + 1] <= x {
                cursor[i] += 1;
            }
            values[i] = c.values()[cursor[i]];
        }
        visit(len, &values);
    }
}

impl DepthMeasure for ModifiedBandDepth {
    fn depths(&self, subjects: &[&BettiCurve], collection: &[&BettiCurve]) -> Result<Vec<f64>> {
        let m = collection.len();
        if m < 2 {
            return Err(Error::domain(format!(
                "band depth needs at least 2 reference curves, got {m}"
            )));
        }
        let all: Vec<&BettiCurve> = collection.iter().chain(subjects.iter()).copied().collect();
        let (_, cap) = check_compatible(&all)?;
        let pairs = choose2(m);
        let norm = if self.include_self_pairs {
            pairs + m as f64
        } else {
            pairs
        };

        let mut acc = vec![0.0; subjects.len()];
        let mut sorted = Vec::with_capacity(m);
        sweep(&all, cap, |len, values| {
            sorted.clear();
            sorted.extend_from_slice(&values[..m]);
            sorted.sort_unstable();
            for (s, y) in values[m..].iter().enumerate() {
                let below = sorted.partition_point(|v| v < y);
                let not_above = sorted.partition_point(|v| v <= y);
                let above = m - not_above;
                let mut bands = pairs - choose2(below) - choose2(above);
                if self.include_self_pairs {
                    bands += (not_above - below) as f64;
                }
                acc[s] += len * bands;
            }
        });
        // summed interval lengths can overshoot the domain by an ulp
        Ok(acc
            .into_iter()
            .map(|a| (a / (norm * cap)).clamp(0.0, 1.0))
            .collect())
    }
}

pub fn depth_registry() -> Registry<dyn DepthMeasure> {
    let mut reg: Registry<dyn DepthMeasure> = Registry::new("depth measure");
    reg.register(Arc::new(ModifiedBandDepth::default()))
        .register(Arc::new(ModifiedBandDepth {
            include_self_pairs: true,
        }));
    reg
}

/// Modified band depth of `subject` within `collection`.
pub fn mbd(subject: &BettiCurve, collection: &[&BettiCurve]) -> Result<f64> {
    ModifiedBandDepth::default().depth(subject, collection)
}

/// Index of the deepest member of `collection`, each member scored against
/// the whole collection. Ties go to the lowest index (earliest day).
pub fn betti_pivot(measure: &dyn DepthMeasure, collection: &[&BettiCurve]) -> Result<usize> {
    match collection.len() {
        0 => Err(Error::domain("pivot of an empty collection")),
        1 => Ok(0),
        _ => {
            let scores = measure.depths(collection, collection)?;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s > scores[best] {
                    best = i;
                }
            }
            Ok(best)
        }
    }
}

fn window_start(t: NaiveDate, w: usize) -> NaiveDate {
    t.checked_sub_days(Days::new(w as u64 - 1))
        .unwrap_or(NaiveDate::MIN)
}

/// Depth of day `t`'s curve among the curves dated `t-w+1 ..= t`, itself
/// included. `None` when there is no curve at `t`; 1 when no other curve
/// falls in the window.
pub fn rolling_depth(
    measure: &dyn DepthMeasure,
    series: &BTreeMap<NaiveDate, BettiCurve>,
    t: NaiveDate,
    w: usize,
) -> Result<Option<f64>> {
    if w < 2 {
        return Err(Error::domain(format!("window must be at least 2, got {w}")));
    }
    let Some(today) = series.get(&t) else {
        return Ok(None);
    };
    let window: Vec<&BettiCurve> = series
        .range(window_start(t, w)..=t)
        .map(|(_, c)| c)
        .collect();
    if window.len() < 2 {
        return Ok(Some(1.0));
    }
    measure.depth(today, &window).map(Some)
}

/// Rolling depth for every dated curve in `series`.
pub fn rolling_depth_series(
    measure: &dyn DepthMeasure,
    series: &BTreeMap<NaiveDate, BettiCurve>,
    w: usize,
) -> Result<BTreeMap<NaiveDate, f64>> {
    series
        .keys()
        .map(|t| {
            let rd = rolling_depth(measure, series, *t, w)?.expect("date taken from series");
            Ok((*t, rd))
        })
        .collect()
}
