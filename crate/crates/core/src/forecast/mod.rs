//! Anomaly forecasting: model specifications, chronological split, random
//! forest training and evaluation.

mod forest;
mod metrics;

pub use forest::{DecisionTree, ForestParams, MtryRule, RandomForest, Vote};
pub use metrics::{agreement_counts, evaluate, Agreement, Metrics};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureColumn, FeatureMatrix, FeatureRow, LabelSpec};
use crate::ingest::PriceSeries;

/// Default largest horizon scanned for reliability.
pub const DEFAULT_MAX_HORIZON: usize = 7;

/// The four nested predictor sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
        }
    }

    /// Baseline price and graph summaries, plus one rolling depth per
    /// additional Betti dimension.
    pub fn feature_set(self) -> &'static [FeatureColumn] {
        use FeatureColumn::*;
        const SETS: [&[FeatureColumn]; 4] = [
            &[Pn, Ne, Nv, Gc],
            &[Pn, Ne, Nv, Gc, Rd0],
            &[Pn, Ne, Nv, Gc, Rd0, Rd1],
            &[Pn, Ne, Nv, Gc, Rd0, Rd1, Rd2],
        ];
        SETS[self as usize]
    }

    /// Highest Betti dimension this model needs.
    pub fn required_dim(self) -> Option<usize> {
        (self as usize).checked_sub(1)
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub forest: ForestParams,
}

impl ModelSpec {
    pub fn new(id: ModelId, forest: ForestParams) -> Self {
        Self { id, forest }
    }

    pub fn feature_set(&self) -> &'static [FeatureColumn] {
        self.id.feature_set()
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub id: ModelId,
    columns: &'static [FeatureColumn],
    forest: RandomForest,
}

fn feature_vector(row: &FeatureRow, columns: &[FeatureColumn]) -> Result<Vec<f64>> {
    columns
        .iter()
        .map(|c| {
            row.get(*c).ok_or_else(|| Error::MissingFeature {
                column: c.name(),
                date: row.date.to_string(),
            })
        })
        .collect()
}

/// Chronological split: the first `floor(2n/3)` rows train, the rest test.
pub fn split(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix)> {
    split_at_fraction(matrix, None)
}

/// Chronological split at `floor(frac * n)`; `None` means exactly 2/3.
pub fn split_at_fraction(
    matrix: &FeatureMatrix,
    frac: Option<f64>,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::domain(format!(
            "need at least 3 rows to split, got {n}"
        )));
    }
    if matrix.rows.windows(2).any(|w| w[0].date >= w[1].date) {
        return Err(Error::domain("rows must be strictly chronological"));
    }
    let cut = match frac {
        None => 2 * n / 3,
        Some(f) if f > 0.0 && f < 1.0 => ((f * n as f64).floor() as usize).clamp(1, n - 1),
        Some(f) => return Err(Error::domain(format!("train fraction {f} outside (0, 1)"))),
    };
    Ok((
        FeatureMatrix {
            rows: matrix.rows[..cut].to_vec(),
        },
        FeatureMatrix {
            rows: matrix.rows[cut..].to_vec(),
        },
    ))
}

/// Fits the model's forest on the labeled rows of `train`.
pub fn train_forest(train: &FeatureMatrix, spec: &ModelSpec) -> Result<ForestModel> {
    let columns = spec.feature_set();
    let mut x = Vec::with_capacity(train.len());
    let mut y = Vec::with_capacity(train.len());
    for row in &train.rows {
        let Some(label) = row.label else { continue };
        x.push(feature_vector(row, columns)?);
        y.push(label);
    }
    if x.is_empty() {
        return Err(Error::domain("no labeled training rows"));
    }
    Ok(ForestModel {
        id: spec.id,
        columns,
        forest: RandomForest::fit(&x, &y, &spec.forest)?,
    })
}

impl ForestModel {
    pub fn forest(&self) -> &RandomForest {
        &self.forest
    }

    /// One vote per row; errors if a row lacks one of the model's features.
    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<Vote>> {
        rows.rows
            .iter()
            .map(|r| Ok(self.forest.vote(&feature_vector(r, self.columns)?)))
            .collect()
    }
}

pub fn predict(model: &ForestModel, rows: &FeatureMatrix) -> Result<Vec<Vote>> {
    model.predict(rows)
}

/// Test-period outcome of one model.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub id: ModelId,
    pub dates: Vec<NaiveDate>,
    pub votes: Vec<Vote>,
    pub labels: Vec<bool>,
    pub metrics: Metrics,
}

impl ModelRun {
    pub fn positive_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.metrics.positive_rows.iter().map(|&i| self.dates[i])
    }
}

/// Splits the labeled rows, trains on the first part and evaluates on the rest.
pub fn run_model(
    matrix: &FeatureMatrix,
    spec: &ModelSpec,
    train_frac: Option<f64>,
) -> Result<ModelRun> {
    let labeled = matrix.labeled();
    let (train, test) = split_at_fraction(&labeled, train_frac)?;
    let model = train_forest(&train, spec)?;
    let votes = model.predict(&test)?;
    let labels: Vec<bool> = test
        .rows
        .iter()
        .map(|r| r.label.expect("labeled"))
        .collect();
    let preds: Vec<bool> = votes.iter().map(|v| v.positive).collect();
    let metrics = evaluate(&preds, &labels)?;
    Ok(ModelRun {
        id: spec.id,
        dates: test.rows.iter().map(|r| r.date).collect(),
        votes,
        labels,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonScan {
    /// Test accuracy per scanned horizon, stopping after the first miss.
    pub accuracies: Vec<(usize, f64)>,
    /// Largest `h` such that every horizon `1..=h` reaches the floor.
    pub max_reliable: Option<usize>,
}

/// Retrains the model at horizons `1..=h_max` and reports the largest
/// horizon up to which test accuracy stays at or above `rho`.
pub fn max_reliable_horizon(
    matrix: &FeatureMatrix,
    prices: &PriceSeries,
    spec: &ModelSpec,
    delta: f64,
    rho: f64,
    h_max: usize,
    train_frac: Option<f64>,
) -> Result<HorizonScan> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!(
            "accuracy floor {rho} outside (0, 1)"
        )));
    }
    let mut scan = HorizonScan {
        accuracies: Vec::new(),
        max_reliable: None,
    };
    for h in 1..=h_max {
        let label = LabelSpec { delta, horizon: h };
        label.validate()?;
        let mut m = matrix.clone();
        m.relabel(prices, &label);
        let acc = match run_model(&m, spec, train_frac) {
            Ok(run) => run.metrics.accuracy,
            Err(Error::Domain(_)) => break,
            Err(e) => return Err(e),
        };
        scan.accuracies.push((h, acc));
        if acc >= rho {
            scan.max_reliable = Some(h);
        } else {
            break;
        }
    }
    Ok(scan)
}
