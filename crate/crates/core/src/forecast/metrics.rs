use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `None` when nothing was predicted positive.
    pub precision: Option<f64>,
    /// `None` when there are no positive labels.
    pub recall: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Indices of rows predicted positive.
    #[serde(skip)]
    pub positive_rows: Vec<usize>,
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Confusion counts and derived ratios of aligned predictions and labels.
pub fn evaluate(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::domain("cannot evaluate an empty prediction set"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut positive_rows = Vec::new();
    for (i, (&p, &l)) in predictions.iter().zip(labels).enumerate() {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        if p {
            positive_rows.push(i);
        }
    }
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / predictions.len() as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        tp,
        fp,
        tn,
        fn_,
        positive_rows,
    })
}

/// Overlap of positive-prediction sets across models.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Agreement {
    /// For every nonempty model subset, items predicted positive by all of them.
    pub intersections: BTreeMap<String, usize>,
    /// Items predicted positive by exactly this subset of models (Venn regions).
    pub exclusive: BTreeMap<String, usize>,
}

/// Venn-style agreement counts. Subset keys join model names with `&`.
pub fn agreement_counts<K: Ord>(sets: &BTreeMap<String, BTreeSet<K>>) -> Agreement {
    let names: Vec<&String> = sets.keys().collect();
    let mut out = Agreement::default();
    let n = names.len();
    if n == 0 || n > 16 {
        return out;
    }
    let universe: BTreeSet<&K> = sets.values().flatten().collect();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let key = members
            .iter()
            .map(|&i| names[i].as_str())
            .collect::<Vec<_>>()
            .join("&");
        let mut all = 0;
        let mut exact = 0;
        for item in &universe {
            let inside: Vec<bool> = names.iter().map(|m| sets[*m].contains(*item)).collect();
            if members.iter().all(|&i| inside[i]) {
                all += 1;
                if (0..n).all(|i| inside[i] == members.contains(&i)) {
                    exact += 1;
                }
            }
        }
        out.intersections.insert(key.clone(), all);
        out.exclusive.insert(key, exact);
    }
    out
}
