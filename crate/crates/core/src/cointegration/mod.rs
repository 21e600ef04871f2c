//! Engle–Granger and hidden (asymmetric-shock) cointegration between token
//! series, and the two-period pairwise protocol.

mod adf;

pub use adf::{
    adf, adf_test, max_lag, AdfResult, CriticalSurface, Deterministic, ENGLE_GRANGER_5PCT,
    MIN_LENGTH, UNIT_ROOT_5PCT,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

/// Minimum common history for a pair to enter the protocol.
pub const MIN_OVERLAP: usize = 40;

fn variance(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Intercept and slope of the least-squares fit `y = a + b x`.
fn ols(y: &[f64], x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Residual unit-root test of the regression of `y` on `x`.
fn residual_test(y: &[f64], x: &[f64]) -> Result<AdfResult> {
    let (a, b) = ols(y, x);
    let resid: Vec<f64> = y.iter().zip(x).map(|(yv, xv)| yv - a - b * xv).collect();
    let scale = variance(y).sqrt().max(f64::MIN_POSITIVE);
    if variance(&resid).sqrt() <= 1e-10 * scale {
        // exact linear relation: residuals vanish up to rounding
        let zeros = vec![0.0; resid.len()];
        return adf(&zeros, Deterministic::None, &ENGLE_GRANGER_5PCT);
    }
    adf(&resid, Deterministic::None, &ENGLE_GRANGER_5PCT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngleGrangerResult {
    /// `y` regressed on `x`.
    pub y_on_x: AdfResult,
    /// `x` regressed on `y`.
    pub x_on_y: AdfResult,
    /// Cointegrated when either direction rejects a unit root at 5%.
    pub cointegrated: bool,
}

impl EngleGrangerResult {
    /// The more negative of the two residual statistics.
    pub fn statistic(&self) -> f64 {
        self.y_on_x.statistic.min(self.x_on_y.statistic)
    }
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::domain(format!(
            "series lengths differ: {} vs {}",
            y.len(),
            x.len()
        )));
    }
    if y.len() < MIN_LENGTH {
        return Err(Error::domain(format!(
            "need at least {MIN_LENGTH} points, got {}",
            y.len()
        )));
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in series"));
    }
    Ok(())
}

/// Two-step Engle–Granger test, run in both regression directions.
pub fn engle_granger(y: &[f64], x: &[f64]) -> Result<EngleGrangerResult> {
    check_pair(y, x)?;
    if variance(x) == 0.0 || variance(y) == 0.0 {
        return Err(Error::domain(
            "zero-variance series in cointegrating regression",
        ));
    }
    let y_on_x = residual_test(y, x)?;
    let x_on_y = residual_test(x, y)?;
    Ok(EngleGrangerResult {
        y_on_x,
        x_on_y,
        cointegrated: y_on_x.reject_unit_root || x_on_y.reject_unit_root,
    })
}

/// Cumulative positive and negative shock components:
/// `pos[t] = s[0] + sum max(ds, 0)`, `neg[t] = sum min(ds, 0)`, so
/// `pos[t] + neg[t] = s[t]`.
pub fn decompose(series: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let Some(&first) = series.first() else {
        return (Vec::new(), Vec::new());
    };
    let mut pos = Vec::with_capacity(series.len());
    let mut neg = Vec::with_capacity(series.len());
    let (mut p, mut q) = (first, 0.0);
    pos.push(p);
    neg.push(q);
    for w in series.windows(2) {
        let d = w[1] - w[0];
        if d > 0.0 {
            p += d;
        } else {
            q += d;
        }
        pos.push(p);
        neg.push(q);
    }
    (pos, neg)
}

/// Outcome for one shock component pair; `Skipped` carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ComponentOutcome {
    Tested(EngleGrangerResult),
    Skipped { skipped: String },
}

impl ComponentOutcome {
    pub fn cointegrated(&self) -> bool {
        matches!(self, ComponentOutcome::Tested(r) if r.cointegrated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HiddenResult {
    /// `(+,+)`: positive components of both series.
    pub positive: ComponentOutcome,
    /// `(-,-)`: negative components of both series.
    pub negative: ComponentOutcome,
    pub cointegrated: bool,
}

fn component(y: &[f64], x: &[f64]) -> Result<ComponentOutcome> {
    if variance(y) == 0.0 || variance(x) == 0.0 {
        return Ok(ComponentOutcome::Skipped {
            skipped: "flat component".into(),
        });
    }
    Ok(ComponentOutcome::Tested(engle_granger(y, x)?))
}

/// Hidden cointegration: Engle–Granger on the positive components and on
/// the negative components; cointegrated when either pair is.
pub fn hidden_cointegration(y: &[f64], x: &[f64]) -> Result<HiddenResult> {
    check_pair(y, x)?;
    let (yp, yn) = decompose(y);
    let (xp, xn) = decompose(x);
    let positive = component(&yp, &xp)?;
    let negative = component(&yn, &xn)?;
    let cointegrated = positive.cointegrated() || negative.cointegrated();
    Ok(HiddenResult {
        positive,
        negative,
        cointegrated,
    })
}

/// Verdict of a pairwise cointegration test, whatever its flavour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CointVerdict {
    pub cointegrated: bool,
    /// Most negative residual statistic among the regressions that ran.
    pub adf_stat: Option<f64>,
    /// Per shock-component verdicts, keyed `"+,+"` / `"-,-"`, for hidden tests.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, bool>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub trait CointegrationTest: Named + Send + Sync {
    fn test(&self, y: &[f64], x: &[f64]) -> Result<CointVerdict>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EngleGranger;

impl Named for EngleGranger {
    fn name(&self) -> &'static str {
        "engle-granger"
    }
}

impl CointegrationTest for EngleGranger {
    fn test(&self, y: &[f64], x: &[f64]) -> Result<CointVerdict> {
        let r = engle_granger(y, x)?;
        Ok(CointVerdict {
            cointegrated: r.cointegrated,
            adf_stat: finite(r.statistic()),
            components: BTreeMap::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HiddenCointegration;

impl Named for HiddenCointegration {
    fn name(&self) -> &'static str {
        "hidden"
    }
}

impl CointegrationTest for HiddenCointegration {
    fn test(&self, y: &[f64], x: &[f64]) -> Result<CointVerdict> {
        let r = hidden_cointegration(y, x)?;
        let stat = [&r.positive, &r.negative]
            .iter()
            .filter_map(|c| match c {
                ComponentOutcome::Tested(t) => Some(t.statistic()),
                ComponentOutcome::Skipped { .. } => None,
            })
            .reduce(f64::min)
            .and_then(finite);
        Ok(CointVerdict {
            cointegrated: r.cointegrated,
            adf_stat: stat,
            components: BTreeMap::from([
                ("+,+".to_string(), r.positive.cointegrated()),
                ("-,-".to_string(), r.negative.cointegrated()),
            ]),
        })
    }
}

pub fn coint_registry() -> Registry<dyn CointegrationTest> {
    let mut reg: Registry<dyn CointegrationTest> = Registry::new("cointegration test");
    reg.register(Arc::new(EngleGranger))
        .register(Arc::new(HiddenCointegration));
    reg
}

/// Daily series a pair is compared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    Price,
    /// Rolling depth of the Betti curve of the given dimension.
    RollingDepth(usize),
}

impl Channel {
    pub fn name(&self) -> String {
        match self {
            Channel::Price => "price".into(),
            Channel::RollingDepth(p) => format!("rd{p}"),
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "price" => Ok(Channel::Price),
            "rd0" => Ok(Channel::RollingDepth(0)),
            "rd1" => Ok(Channel::RollingDepth(1)),
            "rd2" => Ok(Channel::RollingDepth(2)),
            other => Err(format!("unknown channel `{other}` (price, rd0, rd1, rd2)")),
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

/// One token's dated series for every channel it exposes.
#[derive(Debug, Clone, Default)]
pub struct TokenChannels {
    pub token: String,
    pub series: BTreeMap<Channel, BTreeMap<NaiveDate, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodOutcome {
    pub period: &'static str,
    pub start: NaiveDate,
    pub end: NaiveDate,
    #[serde(flatten)]
    pub verdict: Option<CointVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PeriodOutcome {
    pub fn cointegrated(&self) -> bool {
        self.verdict.as_ref().is_some_and(|v| v.cointegrated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub pair: (String, String),
    pub overlap_days: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    /// Channel name to its first- and second-period outcomes.
    pub channels: BTreeMap<String, Vec<PeriodOutcome>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ProtocolSummary {
    /// Pairs cointegrated in price in both periods.
    pub price_both_periods: usize,
    /// Pairs cointegrated in the descriptor channel in the first period and
    /// in price in the second.
    pub channel_then_price: usize,
    pub pairs_tested: usize,
    pub pairs_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub test: String,
    pub channel: String,
    pub pairs: Vec<PairReport>,
    /// channel -> period -> cointegrated pairs.
    pub edges: BTreeMap<String, BTreeMap<String, Vec<(String, String)>>>,
    pub summary: ProtocolSummary,
}

fn run_period(
    test: &dyn CointegrationTest,
    a: &BTreeMap<NaiveDate, f64>,
    b: &BTreeMap<NaiveDate, f64>,
    dates: &[NaiveDate],
    period: &'static str,
) -> PeriodOutcome {
    let y: Vec<f64> = dates.iter().map(|d| a[d]).collect();
    let x: Vec<f64> = dates.iter().map(|d| b[d]).collect();
    let (verdict, error) = match test.test(&y, &x) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    PeriodOutcome {
        period,
        start: dates[0],
        end: *dates.last().unwrap(),
        verdict,
        error,
    }
}

fn common_dates(a: &TokenChannels, b: &TokenChannels, channels: &[Channel]) -> Vec<NaiveDate> {
    let Some(first) = a.series.get(&channels[0]) else {
        return Vec::new();
    };
    first
        .keys()
        .copied()
        .filter(|d| {
            channels.iter().all(|c| {
                a.series.get(c).is_some_and(|s| s.contains_key(d))
                    && b.series.get(c).is_some_and(|s| s.contains_key(d))
            })
        })
        .collect()
}

fn pair_report(
    a: &TokenChannels,
    b: &TokenChannels,
    channels: &[Channel],
    test: &dyn CointegrationTest,
) -> PairReport {
    let dates = common_dates(a, b, channels);
    let mut report = PairReport {
        pair: (a.token.clone(), b.token.clone()),
        overlap_days: dates.len(),
        skipped: None,
        channels: BTreeMap::new(),
    };
    if dates.len() < MIN_OVERLAP {
        report.skipped = Some(format!(
            "common history of {} days is shorter than {MIN_OVERLAP}",
            dates.len()
        ));
        return report;
    }
    let (first, second) = dates.split_at(dates.len() / 2);
    for c in channels {
        let (sa, sb) = (&a.series[c], &b.series[c]);
        report.channels.insert(
            c.name(),
            vec![
                run_period(test, sa, sb, first, "first"),
                run_period(test, sa, sb, second, "second"),
            ],
        );
    }
    report
}

/// Runs `test` on every unordered token pair over the two halves of their
/// common history, on prices and on `channel`.
pub fn pairwise_protocol(
    tokens: &[TokenChannels],
    channel: Channel,
    test: &dyn CointegrationTest,
) -> ProtocolReport {
    let mut channels = vec![Channel::Price];
    if channel != Channel::Price {
        channels.push(channel);
    }
    let mut sorted: Vec<&TokenChannels> = tokens.iter().collect();
    sorted.sort_by(|a, b| a.token.cmp(&b.token));
    sorted.dedup_by(|a, b| a.token == b.token);
    let pairs: Vec<(usize, usize)> = (0..sorted.len())
        .flat_map(|i| (i + 1..sorted.len()).map(move |j| (i, j)))
        .collect();
    let reports: Vec<PairReport> = pairs
        .par_iter()
        .map(|&(i, j)| pair_report(sorted[i], sorted[j], &channels, test))
        .collect();

    let mut edges: BTreeMap<String, BTreeMap<String, Vec<(String, String)>>> = BTreeMap::new();
    let mut summary = ProtocolSummary::default();
    for r in &reports {
        if r.skipped.is_some() {
            summary.pairs_skipped += 1;
            continue;
        }
        summary.pairs_tested += 1;
        for (name, periods) in &r.channels {
            for p in periods {
                let list = edges
                    .entry(name.clone())
                    .or_default()
                    .entry(p.period.to_string())
                    .or_default();
                if p.cointegrated() {
                    list.push(r.pair.clone());
                }
            }
        }
        let price = &r.channels["price"];
        if price[0].cointegrated() && price[1].cointegrated() {
            summary.price_both_periods += 1;
        }
        if r.channels[&channel.name()][0].cointegrated() && price[1].cointegrated() {
            summary.channel_then_price += 1;
        }
    }
    ProtocolReport {
        test: test.name().to_string(),
        channel: channel.name(),
        pairs: reports,
        edges,
        summary,
    }
}
