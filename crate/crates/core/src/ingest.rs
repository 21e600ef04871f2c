//! Transaction and price ingestion, per-day graph aggregation and hub filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TX_HEADER: [&str; 5] = ["token", "from", "to", "amount", "timestamp"];
const PRICE_HEADER: [&str; 3] = ["token", "date", "open"];

#[derive(Debug, Clone, PartialEq)]
pub struct TokenTransaction {
    pub token: String,
    pub from: String,
    pub to: String,
    pub amount: f64,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
}

impl TokenTransaction {
    /// UTC calendar day of the transaction.
    pub fn day(&self) -> NaiveDate {
        DateTime::from_timestamp(self.timestamp, 0)
            .expect("timestamp validated at parse time")
            .date_naive()
    }
}

/// Daily open prices of one token, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub token: String,
    entries: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(token: impl Into<String>, mut entries: Vec<(NaiveDate, f64)>) -> Result<Self> {
        entries.sort_by_key(|(d, _)| *d);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::domain(format!("duplicate price date {}", w[0].0)));
            }
        }
        if let Some((d, p)) = entries.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::domain(format!("non-positive price {p} on {d}")));
        }
        Ok(Self {
            token: token.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[(NaiveDate, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.entries
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.entries.iter().map(|(d, _)| *d)
    }

    pub fn max_price(&self) -> Option<f64> {
        self.entries.iter().map(|(_, p)| *p).reduce(f64::max)
    }

    /// Keeps only entries dated on or before `last`.
    pub fn truncated(&self, last: NaiveDate) -> Self {
        Self {
            token: self.token.clone(),
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|(d, _)| *d <= last)
                .collect(),
        }
    }
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_transaction(path: &Path, rec: &csv::StringRecord) -> Result<TokenTransaction> {
    let line = rec.position().map_or(0, |p| p.line());
    if rec.len() != TX_HEADER.len() {
        return Err(parse_err(
            path,
            line,
            format!("expected 5 fields, found {}", rec.len()),
        ));
    }
    let amount: f64 = rec[3]
        .parse()
        .map_err(|e| parse_err(path, line, format!("bad amount `{}`: {e}", &rec[3])))?;
    if !amount.is_finite() || amount < 0.0 {
        return Err(parse_err(
            path,
            line,
            format!("amount must be non-negative, got {amount}"),
        ));
    }
    let timestamp: i64 = rec[4]
        .parse()
        .map_err(|e| parse_err(path, line, format!("bad timestamp `{}`: {e}", &rec[4])))?;
    if DateTime::from_timestamp(timestamp, 0).is_none() {
        return Err(parse_err(
            path,
            line,
            format!("timestamp {timestamp} out of range"),
        ));
    }
    Ok(TokenTransaction {
        token: rec[0].to_string(),
        from: rec[1].to_string(),
        to: rec[2].to_string(),
        amount,
        timestamp,
    })
}

/// Reads every token's transactions from `path`, dropping self-loops.
/// Each token's list is sorted by timestamp (stable, so file order breaks ties).
pub fn load_all_transactions(path: &Path) -> Result<BTreeMap<String, Vec<TokenTransaction>>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    check_header(path, &headers, &TX_HEADER)?;
    let mut out: BTreeMap<String, Vec<TokenTransaction>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let tx = parse_transaction(path, &rec)?;
        if tx.from == tx.to {
            continue;
        }
        out.entry(tx.token.clone()).or_default().push(tx);
    }
    for txs in out.values_mut() {
        txs.sort_by_key(|t| t.timestamp);
    }
    Ok(out)
}

/// Transactions of a single token. An unknown token yields an empty list.
pub fn load_transactions(path: &Path, token: &str) -> Result<Vec<TokenTransaction>> {
    let mut all = load_all_transactions(path)?;
    match all.remove(token) {
        Some(txs) => Ok(txs),
        None => {
            log::warn!("token `{token}` has no transactions in {}", path.display());
            Ok(Vec::new())
        }
    }
}

pub fn load_all_prices(path: &Path) -> Result<BTreeMap<String, PriceSeries>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    check_header(path, &headers, &PRICE_HEADER)?;
    let mut raw: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != PRICE_HEADER.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| parse_err(path, line, format!("bad date `{}`: {e}", &rec[1])))?;
        let open: f64 = rec[2]
            .parse()
            .map_err(|e| parse_err(path, line, format!("bad price `{}`: {e}", &rec[2])))?;
        if !(open.is_finite() && open > 0.0) {
            return Err(parse_err(
                path,
                line,
                format!("price must be positive, got {open}"),
            ));
        }
        raw.entry(rec[0].to_string())
            .or_default()
            .push((date, open));
    }
    raw.into_iter()
        .map(|(token, entries)| {
            let series = PriceSeries::new(token.clone(), entries)
                .map_err(|e| parse_err(path, 0, format!("token `{token}`: {e}")))?;
            Ok((token, series))
        })
        .collect()
}

/// Where the amount range used by the weight formula is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AmountNormalization {
    /// Over the full daily graph, before hub filtering.
    PreFilter,
    /// Over the graph that remains after hub filtering.
    #[default]
    PostFilter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Aggregated amount transferred between the two endpoints, both directions.
    pub amount: f64,
    /// Dissimilarity in `[1/(1+alpha), 1]`.
    pub weight: f64,
}

/// Undirected weighted transaction graph of one token on one day.
///
/// Edge keys are ordered address pairs `(a, b)` with `a < b`. Pairs without
/// an edge have infinite dissimilarity and never enter a filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyGraph {
    pub token: String,
    pub date: NaiveDate,
    pub alpha: f64,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), Edge>,
    /// Number of (non-self-loop) transactions aggregated into this graph.
    pub tx_count: usize,
}

/// `[1 + alpha * (a - a_min) / (a_max - a_min)]^-1`, or 1 when all amounts coincide.
pub fn edge_weight(amount: f64, a_min: f64, a_max: f64, alpha: f64) -> f64 {
    if a_max <= a_min {
        return 1.0;
    }
    1.0 / (1.0 + alpha * (amount - a_min) / (a_max - a_min))
}

fn edge_key(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl DailyGraph {
    pub fn empty(token: impl Into<String>, date: NaiveDate, alpha: f64) -> Self {
        Self {
            token: token.into(),
            date,
            alpha,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            tx_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Recomputes every weight from this graph's own amount range.
    pub fn reweight(&mut self) {
        let (a_min, a_max) = self
            .edges
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                (lo.min(e.amount), hi.max(e.amount))
            });
        let alpha = self.alpha;
        for e in self.edges.values_mut() {
            e.weight = edge_weight(e.amount, a_min, a_max, alpha);
        }
    }

    /// Per-node (degree, total incident amount).
    pub fn degrees(&self) -> BTreeMap<&str, (usize, f64)> {
        let mut deg: BTreeMap<&str, (usize, f64)> =
            self.nodes.iter().map(|n| (n.as_str(), (0, 0.0))).collect();
        for ((a, b), e) in &self.edges {
            for n in [a, b] {
                let d = deg.get_mut(n.as_str()).expect("edge endpoint is a node");
                d.0 += 1;
                d.1 += e.amount;
            }
        }
        deg
    }
}

/// Aggregates the transactions of `date` into an undirected weighted graph.
pub fn build_daily_graph(
    txs: &[TokenTransaction],
    token: &str,
    date: NaiveDate,
    alpha: f64,
) -> Result<DailyGraph> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let mut g = DailyGraph::empty(token, date, alpha);
    let mut amounts: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for tx in txs {
        if tx.day() != date {
            return Err(Error::domain(format!(
                "transaction at {} does not fall on {date}",
                tx.timestamp
            )));
        }
        if tx.from == tx.to {
            continue;
        }
        g.nodes.insert(tx.from.clone());
        g.nodes.insert(tx.to.clone());
        amounts
            .entry(edge_key(&tx.from, &tx.to))
            .or_default()
            .push(tx.amount);
        g.tx_count += 1;
    }
    // summing in sorted order makes the graph independent of input order
    for (key, mut parts) in amounts {
        parts.sort_by(f64::total_cmp);
        let amount = parts.iter().sum();
        g.edges.insert(
            key,
            Edge {
                amount,
                weight: 1.0,
            },
        );
    }
    g.reweight();
    Ok(g)
}

/// Splits a token's transactions by UTC calendar day.
pub fn group_by_day(txs: &[TokenTransaction]) -> BTreeMap<NaiveDate, Vec<TokenTransaction>> {
    let mut days: BTreeMap<NaiveDate, Vec<TokenTransaction>> = BTreeMap::new();
    for tx in txs {
        days.entry(tx.day()).or_default().push(tx.clone());
    }
    days
}

/// Induced subgraph on the `k` highest-degree nodes, reweighted from the
/// induced graph's own amount range.
pub fn top_k_filter(g: &DailyGraph, k: usize) -> DailyGraph {
    top_k_filter_with(g, k, AmountNormalization::PostFilter)
}

pub fn top_k_filter_with(g: &DailyGraph, k: usize, norm: AmountNormalization) -> DailyGraph {
    assert!(k >= 1, "k must be at least 1");
    if g.nodes.len() <= k {
        return g.clone();
    }
    let mut ranked: Vec<(&str, (usize, f64))> = g.degrees().into_iter().collect();
    // degree desc, incident amount desc, address asc
    ranked.sort_by(|a, b| {
        b.1 .0
            .cmp(&a.1 .0)
            .then(b.1 .1.total_cmp(&a.1 .1))
            .then(a.0.cmp(b.0))
    });
    let keep: BTreeSet<String> = ranked[..k].iter().map(|(n, _)| n.to_string()).collect();
    let edges: BTreeMap<(String, String), Edge> = g
        .edges
        .iter()
        .filter(|((a, b), _)| keep.contains(a) && keep.contains(b))
        .map(|(k, e)| (k.clone(), *e))
        .collect();
    let mut out = DailyGraph {
        token: g.token.clone(),
        date: g.date,
        alpha: g.alpha,
        nodes: keep,
        edges,
        tx_count: g.tx_count,
    };
    if norm == AmountNormalization::PostFilter {
        out.reweight();
    }
    out
}
