//! Price labels, graph summaries and the per-day feature matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::{betti_pivot, rolling_depth_series, DepthMeasure};
use crate::error::{Error, Result};
use crate::homology::{graph_betti_curves, BettiCurve, FiltrationSpec, MAX_HOMOLOGY_DIM};
use crate::ingest::{
    build_daily_graph, group_by_day, top_k_filter_with, AmountNormalization, DailyGraph,
    PriceSeries, TokenTransaction,
};

/// Predictor columns, in model order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureColumn {
    Pn,
    Ne,
    Nv,
    Gc,
    Rd0,
    Rd1,
    Rd2,
}

impl FeatureColumn {
    pub const ALL: [FeatureColumn; 7] = [
        FeatureColumn::Pn,
        FeatureColumn::Ne,
        FeatureColumn::Nv,
        FeatureColumn::Gc,
        FeatureColumn::Rd0,
        FeatureColumn::Rd1,
        FeatureColumn::Rd2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureColumn::Pn => "pn",
            FeatureColumn::Ne => "ne",
            FeatureColumn::Nv => "nv",
            FeatureColumn::Gc => "gc",
            FeatureColumn::Rd0 => "rd0",
            FeatureColumn::Rd1 => "rd1",
            FeatureColumn::Rd2 => "rd2",
        }
    }

    pub fn rolling_depth(dim: usize) -> Self {
        [FeatureColumn::Rd0, FeatureColumn::Rd1, FeatureColumn::Rd2][dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub token: String,
    pub date: NaiveDate,
    pub pn: f64,
    pub ne: usize,
    pub nv: usize,
    pub gc: f64,
    /// Rolling depth of `B_0..B_2`; `None` above the configured dimension.
    pub rd: [Option<f64>; 3],
    /// Raw transactions of the day, before filtering.
    pub tx_count: usize,
    /// Anomaly within the horizon; `None` when future prices are missing.
    pub label: Option<bool>,
}

impl FeatureRow {
    pub fn get(&self, col: FeatureColumn) -> Option<f64> {
        match col {
            FeatureColumn::Pn => Some(self.pn),
            FeatureColumn::Ne => Some(self.ne as f64),
            FeatureColumn::Nv => Some(self.nv as f64),
            FeatureColumn::Gc => Some(self.gc),
            FeatureColumn::Rd0 => self.rd[0],
            FeatureColumn::Rd1 => self.rd[1],
            FeatureColumn::Rd2 => self.rd[2],
        }
    }
}

/// Chronologically ordered rows of one token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(mut rows: Vec<FeatureRow>) -> Self {
        rows.sort_by_key(|r| r.date);
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Recomputes every label for another threshold or horizon.
    pub fn relabel(&mut self, prices: &PriceSeries, spec: &LabelSpec) {
        for r in &mut self.rows {
            r.label = anomaly_flag(prices, r.date, spec);
        }
    }

    /// Rows that carry a label, in order.
    pub fn labeled(&self) -> FeatureMatrix {
        FeatureMatrix {
            rows: self
                .rows
                .iter()
                .filter(|r| r.label.is_some())
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    /// Absolute-return threshold of a price shock.
    pub delta: f64,
    /// Days ahead searched for a shock.
    pub horizon: usize,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self {
            delta: 0.25,
            horizon: 2,
        }
    }
}

impl LabelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::domain(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.horizon < 1 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        Ok(())
    }
}

fn prev_day(t: NaiveDate) -> Option<NaiveDate> {
    t.checked_sub_days(Days::new(1))
}

/// Day-over-day relative change of the open price; `None` without both prices.
pub fn price_return(prices: &PriceSeries, t: NaiveDate) -> Option<f64> {
    let today = prices.get(t)?;
    let before = prices.get(prev_day(t)?)?;
    Some((today - before) / before)
}

/// Whether any of days `t+1 ..= t+h` has an absolute return of at least
/// `delta`. `None` when a return in that range cannot be computed.
pub fn anomaly_flag(prices: &PriceSeries, t: NaiveDate, spec: &LabelSpec) -> Option<bool> {
    let mut hit = false;
    for s in 1..=spec.horizon {
        let day = t.checked_add_days(Days::new(s as u64))?;
        let r = price_return(prices, day)?;
        hit |= r.abs() >= spec.delta;
    }
    Some(hit)
}

/// Price at `t` over the maximum price of the whole series.
pub fn normalized_price(prices: &PriceSeries, t: NaiveDate) -> Option<f64> {
    Some(prices.get(t)? / prices.max_price()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSummary {
    pub ne: usize,
    pub nv: usize,
    /// Mean local clustering coefficient; nodes of degree < 2 count as 0.
    pub gc: f64,
}

pub fn graph_summaries(g: &DailyGraph) -> GraphSummary {
    let mut adj: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for (a, b) in g.edges.keys() {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut total = 0.0;
    for n in &g.nodes {
        let Some(nbrs) = adj.get(n.as_str()) else {
            continue;
        };
        let k = nbrs.len();
        if k < 2 {
            continue;
        }
        let nbrs: Vec<&str> = nbrs.iter().copied().collect();
        let mut links = 0usize;
        for (i, u) in nbrs.iter().enumerate() {
            let nu = &adj[u];
            links += nbrs[i + 1..].iter().filter(|v| nu.contains(*v)).count();
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    let nv = g.nodes.len();
    GraphSummary {
        ne: g.edges.len(),
        nv,
        gc: if nv == 0 { 0.0 } else { total / nv as f64 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub k: usize,
    pub alpha: f64,
    pub window: usize,
    pub filtration: FiltrationSpec,
    pub label: LabelSpec,
    pub normalization: AmountNormalization,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k: 150,
            alpha: 9.0,
            window: crate::depth::DEFAULT_WINDOW,
            filtration: FiltrationSpec::default(),
            label: LabelSpec::default(),
            normalization: AmountNormalization::PostFilter,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::domain("k must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.window < 2 {
            return Err(Error::domain("window must be at least 2"));
        }
        self.filtration.validate()?;
        self.label.validate()
    }
}

/// Everything derived for one token: feature rows, the daily Betti curves
/// behind them and the per-dimension Betti pivot day.
#[derive(Debug, Clone)]
pub struct TokenFeatures {
    pub token: String,
    pub matrix: FeatureMatrix,
    /// Daily curves `B_0..B_d` of the filtered graphs.
    pub curves: BTreeMap<NaiveDate, Vec<BettiCurve>>,
    /// Daily rolling depth per dimension.
    pub rolling: Vec<BTreeMap<NaiveDate, f64>>,
    /// Day whose curve is the pivot of each dimension's history.
    pub pivots: Vec<Option<NaiveDate>>,
}

struct DayTopology {
    summary: GraphSummary,
    tx_count: usize,
    curves: Vec<BettiCurve>,
}

/// Builds the per-day predictors and labels of one token: filtered graph,
/// Betti curves, rolling depths, price and graph summaries.
pub fn build_feature_matrix(
    token: &str,
    txs: &[TokenTransaction],
    prices: &PriceSeries,
    config: &FeatureConfig,
    measure: &dyn DepthMeasure,
) -> Result<TokenFeatures> {
    config.validate()?;
    let by_day = group_by_day(txs);
    let days: Vec<(&NaiveDate, &Vec<TokenTransaction>)> = by_day.iter().collect();
    let topo: Vec<(NaiveDate, Option<DayTopology>)> = days
        .par_iter()
        .map(|(date, day_txs)| {
            let g = build_daily_graph(day_txs, token, **date, config.alpha)?;
            if g.is_empty() {
                return Ok((**date, None));
            }
            let g = top_k_filter_with(&g, config.k, config.normalization);
            let curves = graph_betti_curves(&g, &config.filtration)?;
            Ok((
                **date,
                Some(DayTopology {
                    summary: graph_summaries(&g),
                    tx_count: g.tx_count,
                    curves,
                }),
            ))
        })
        .collect::<Result<_>>()?;
    let topo: BTreeMap<NaiveDate, DayTopology> = topo
        .into_iter()
        .filter_map(|(d, t)| t.map(|t| (d, t)))
        .collect();

    let max_dim = config.filtration.max_homology_dim;
    let per_dim: Vec<BTreeMap<NaiveDate, BettiCurve>> = (0..=max_dim)
        .map(|p| {
            topo.iter()
                .map(|(d, t)| (*d, t.curves[p].clone()))
                .collect()
        })
        .collect();
    let rolling: Vec<BTreeMap<NaiveDate, f64>> = per_dim
        .par_iter()
        .map(|series| rolling_depth_series(measure, series, config.window))
        .collect::<Result<_>>()?;
    let pivots: Vec<Option<NaiveDate>> = per_dim
        .par_iter()
        .map(|series| {
            if series.is_empty() {
                return Ok(None);
            }
            let dates: Vec<NaiveDate> = series.keys().copied().collect();
            let curves: Vec<&BettiCurve> = series.values().collect();
            Ok(Some(dates[betti_pivot(measure, &curves)?]))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (date, t) in &topo {
        let Some(pn) = normalized_price(prices, *date) else {
            continue;
        };
        let mut rd = [None; MAX_HOMOLOGY_DIM + 1];
        for (p, series) in rolling.iter().enumerate() {
            rd[p] = series.get(date).copied();
        }
        rows.push(FeatureRow {
            token: token.to_string(),
            date: *date,
            pn,
            ne: t.summary.ne,
            nv: t.summary.nv,
            gc: t.summary.gc,
            rd,
            tx_count: t.tx_count,
            label: anomaly_flag(prices, *date, &config.label),
        });
    }

    Ok(TokenFeatures {
        token: token.to_string(),
        matrix: FeatureMatrix::new(rows),
        curves: topo.into_iter().map(|(d, t)| (d, t.curves)).collect(),
        rolling,
        pivots,
    })
}
