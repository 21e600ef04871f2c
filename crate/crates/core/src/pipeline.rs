//! End-to-end batch run: ingest, Betti curves, depths, features, forecasts
//! and pairwise cointegration, written as plot-ready files.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cointegration::{
    coint_registry, pairwise_protocol, Channel, ProtocolReport, TokenChannels,
};
use crate::depth::{depth_registry, DepthMeasure};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureConfig, LabelSpec, TokenFeatures};
use crate::forecast::{
    agreement_counts, evaluate, max_reliable_horizon, run_model, ForestParams, HorizonScan,
    Metrics, ModelId, ModelRun, ModelSpec,
};
use crate::ingest::{load_all_prices, load_all_transactions, PriceSeries, TokenTransaction};

pub const OUTPUT_FILES: [&str; 6] = [
    "features.csv",
    "betti_curves.csv",
    "predictions.csv",
    "metrics.json",
    "cointegration.json",
    "manifest.json",
];

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub transactions: PathBuf,
    pub prices: PathBuf,
    pub out_dir: PathBuf,
    /// Tokens to process; empty means every token present in both files.
    pub tokens: Vec<String>,
    pub features: FeatureConfig,
    /// Extra horizons evaluated in `metrics.json` besides the primary one.
    pub extra_horizons: Vec<usize>,
    pub forest: ForestParams,
    /// `None` trains on exactly the first 2/3 of rows.
    pub train_frac: Option<f64>,
    pub rho: f64,
    /// Largest horizon scanned for reliability; 0 disables the scan.
    pub h_max: usize,
    pub coint_channel: Channel,
    pub coint_test: String,
    pub depth: String,
    pub jobs: Option<usize>,
    /// Append the raw transaction count to `features.csv`.
    pub tx_count_column: bool,
}

impl PipelineConfig {
    pub fn new(transactions: PathBuf, prices: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            transactions,
            prices,
            out_dir,
            tokens: Vec::new(),
            features: FeatureConfig::default(),
            extra_horizons: Vec::new(),
            forest: ForestParams::default(),
            train_frac: None,
            rho: 0.9,
            h_max: crate::forecast::DEFAULT_MAX_HORIZON,
            coint_channel: Channel::RollingDepth(1),
            coint_test: "hidden".into(),
            depth: "mbd".into(),
            jobs: None,
            tx_count_column: false,
        }
    }

    pub fn horizons(&self) -> Vec<usize> {
        let mut h: BTreeSet<usize> = self.extra_horizons.iter().copied().collect();
        h.insert(self.features.label.horizon);
        h.into_iter().collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.horizons().contains(&0) {
            return Err(Error::domain("horizons must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::domain(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if let Some(f) = self.train_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::domain(format!(
                    "train fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        if self.forest.trees == 0 || self.forest.min_leaf == 0 {
            return Err(Error::domain("trees and min-leaf must be positive"));
        }
        if let Channel::RollingDepth(p) = self.coint_channel {
            if p > self.features.filtration.max_homology_dim {
                return Err(Error::domain(format!(
                    "cointegration channel rd{p} exceeds max dimension {}",
                    self.features.filtration.max_homology_dim
                )));
            }
        }
        depth_registry().get(&self.depth)?;
        coint_registry().get(&self.coint_test)?;
        Ok(())
    }

    /// Models whose predictors exist under the configured dimension.
    pub fn models(&self) -> Vec<ModelId> {
        let d = self.features.filtration.max_homology_dim;
        ModelId::ALL
            .into_iter()
            .filter(|m| m.required_dim().is_none_or(|r| r <= d))
            .collect()
    }
}

/// Failure confined to one token.
#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub token: String,
    pub stage: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    pub message: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub tokens_processed: Vec<String>,
    pub token_errors: Vec<StageError>,
    pub out_dir: PathBuf,
}

struct ModelOutcome {
    run: std::result::Result<ModelRun, String>,
}

struct TokenOutput {
    features: TokenFeatures,
    /// horizon -> model -> outcome
    runs: BTreeMap<usize, BTreeMap<ModelId, ModelOutcome>>,
    scans: BTreeMap<ModelId, std::result::Result<HorizonScan, String>>,
}

fn process_token(
    token: &str,
    txs: &[TokenTransaction],
    prices: &PriceSeries,
    config: &PipelineConfig,
    measure: &dyn DepthMeasure,
) -> std::result::Result<TokenOutput, StageError> {
    let features =
        build_feature_matrix(token, txs, prices, &config.features, measure).map_err(|e| {
            StageError {
                token: token.to_string(),
                stage: "features",
                date: None,
                message: e.to_string(),
            }
        })?;
    let models = config.models();
    let mut runs = BTreeMap::new();
    for h in config.horizons() {
        let mut matrix = features.matrix.clone();
        if h != config.features.label.horizon {
            matrix.relabel(
                prices,
                &LabelSpec {
                    delta: config.features.label.delta,
                    horizon: h,
                },
            );
        }
        let per_model: BTreeMap<ModelId, ModelOutcome> = models
            .par_iter()
            .map(|&id| {
                let spec = ModelSpec::new(id, config.forest);
                let run = run_model(&matrix, &spec, config.train_frac).map_err(|e| e.to_string());
                (id, ModelOutcome { run })
            })
            .collect();
        runs.insert(h, per_model);
    }
    let scans = if config.h_max == 0 {
        BTreeMap::new()
    } else {
        models
            .par_iter()
            .map(|&id| {
                let spec = ModelSpec::new(id, config.forest);
                let scan = max_reliable_horizon(
                    &features.matrix,
                    prices,
                    &spec,
                    config.features.label.delta,
                    config.rho,
                    config.h_max,
                    config.train_frac,
                )
                .map_err(|e| e.to_string());
                (id, scan)
            })
            .collect()
    };
    Ok(TokenOutput {
        features,
        runs,
        scans,
    })
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

fn metrics_json(m: &Metrics) -> Value {
    json!({
        "accuracy": m.accuracy,
        "precision": opt(m.precision),
        "recall": opt(m.recall),
        "tp": m.tp,
        "fp": m.fp,
        "tn": m.tn,
        "fn": m.fn_,
        "test_rows": m.total(),
        "positive_predictions": m.tp + m.fp,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn features_csv(outputs: &[(String, TokenOutput)], with_tx: bool) -> String {
    let mut s = String::from("token,date,pn,ne,nv,gc,rd0,rd1,rd2,label");
    if with_tx {
        s.push_str(",ntx");
    }
    s.push('\n');
    for (_, out) in outputs {
        for r in &out.features.matrix.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.token,
                r.date,
                r.pn,
                r.ne,
                r.nv,
                r.gc,
                fmt_opt(r.rd[0]),
                fmt_opt(r.rd[1]),
                fmt_opt(r.rd[2]),
                r.label.map(|l| l.to_string()).unwrap_or_default()
            ));
            if with_tx {
                s.push_str(&format!(",{}", r.tx_count));
            }
            s.push('\n');
        }
    }
    s
}

fn curves_csv(outputs: &[(String, TokenOutput)]) -> String {
    let mut s = String::from("token,date,dim,breakpoint,value\n");
    for (token, out) in outputs {
        for (date, curves) in &out.features.curves {
            for c in curves {
                for (b, v) in c.breakpoints().iter().zip(c.values()) {
                    s.push_str(&format!("{token},{date},{},{b},{v}\n", c.dim()));
                }
            }
        }
    }
    s
}

fn predictions_csv(outputs: &[(String, TokenOutput)], horizon: usize) -> String {
    let mut s = String::from("token,date,model,vote_fraction,prediction,label\n");
    for (token, out) in outputs {
        let Some(per_model) = out.runs.get(&horizon) else {
            continue;
        };
        for (id, outcome) in per_model {
            let Ok(run) = &outcome.run else { continue };
            for i in 0..run.dates.len() {
                s.push_str(&format!(
                    "{token},{},{id},{},{},{}\n",
                    run.dates[i], run.votes[i].fraction, run.votes[i].positive, run.labels[i]
                ));
            }
        }
    }
    s
}

/// Predictions and labels pooled across tokens.
type Pooled = (Vec<bool>, Vec<bool>);

fn metrics_doc(
    outputs: &[(String, TokenOutput)],
    config: &PipelineConfig,
    errors: &[StageError],
) -> Value {
    let mut tokens = serde_json::Map::new();
    // horizon -> model -> pooled (predictions, labels) and positive (token, date) set
    let mut pooled: BTreeMap<usize, BTreeMap<ModelId, Pooled>> = BTreeMap::new();
    let mut positives: BTreeMap<usize, BTreeMap<String, BTreeSet<(String, NaiveDate)>>> =
        BTreeMap::new();

    for (token, out) in outputs {
        let mut horizons = serde_json::Map::new();
        for (h, per_model) in &out.runs {
            let mut models = serde_json::Map::new();
            let mut sets: BTreeMap<String, BTreeSet<NaiveDate>> = BTreeMap::new();
            for (id, outcome) in per_model {
                match &outcome.run {
                    Ok(run) => {
                        models.insert(id.to_string(), metrics_json(&run.metrics));
                        sets.insert(id.to_string(), run.positive_dates().collect());
                        let entry = pooled.entry(*h).or_default().entry(*id).or_default();
                        entry.0.extend(run.votes.iter().map(|v| v.positive));
                        entry.1.extend(run.labels.iter().copied());
                        positives
                            .entry(*h)
                            .or_default()
                            .entry(id.to_string())
                            .or_default()
                            .extend(run.positive_dates().map(|d| (token.clone(), d)));
                    }
                    Err(msg) => {
                        models.insert(id.to_string(), json!({ "skipped": msg }));
                    }
                }
            }
            horizons.insert(
                h.to_string(),
                json!({ "models": models, "agreement": agreement_counts(&sets) }),
            );
        }
        let mut scans = serde_json::Map::new();
        for (id, scan) in &out.scans {
            let v = match scan {
                Ok(s) => json!({
                    "max_reliable_horizon": s.max_reliable,
                    "accuracies": s.accuracies.iter().map(|(h, a)| json!({"horizon": h, "accuracy": a})).collect::<Vec<_>>(),
                }),
                Err(msg) => json!({ "skipped": msg }),
            };
            scans.insert(id.to_string(), v);
        }
        let pivots: serde_json::Map<String, Value> = out
            .features
            .pivots
            .iter()
            .enumerate()
            .map(|(p, d)| {
                (
                    format!("b{p}"),
                    d.map_or(Value::Null, |d| json!(d.to_string())),
                )
            })
            .collect();
        tokens.insert(
            token.clone(),
            json!({
                "rows": out.features.matrix.len(),
                "labeled_rows": out.features.matrix.labeled().len(),
                "betti_pivots": pivots,
                "horizons": horizons,
                "horizon_scan": scans,
            }),
        );
    }

    let mut overall = serde_json::Map::new();
    for (h, per_model) in &pooled {
        let mut models = serde_json::Map::new();
        for (id, (preds, labels)) in per_model {
            if let Ok(m) = evaluate(preds, labels) {
                models.insert(id.to_string(), metrics_json(&m));
            }
        }
        let agreement = positives.get(h).map(agreement_counts).unwrap_or_default();
        overall.insert(
            h.to_string(),
            json!({ "models": models, "agreement": agreement }),
        );
    }

    json!({
        "primary_horizon": config.features.label.horizon,
        "rho": config.rho,
        "tokens": tokens,
        "overall": overall,
        "errors": errors,
    })
}

fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_json(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cointegration_inputs(
    outputs: &[(String, TokenOutput)],
    prices: &BTreeMap<String, PriceSeries>,
) -> Vec<TokenChannels> {
    outputs
        .iter()
        .map(|(token, out)| {
            let mut series = BTreeMap::new();
            series.insert(
                Channel::Price,
                prices[token]
                    .entries()
                    .iter()
                    .copied()
                    .collect::<BTreeMap<_, _>>(),
            );
            for (p, rd) in out.features.rolling.iter().enumerate() {
                series.insert(Channel::RollingDepth(p), rd.clone());
            }
            TokenChannels {
                token: token.clone(),
                series,
            }
        })
        .collect()
}

/// Runs the whole pipeline and writes every output file into `out_dir`.
///
/// Inputs are read and validated before anything is written. A token that
/// fails is reported in `metrics.json` and the returned summary without
/// affecting the other tokens' outputs.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let measure = depth_registry().get(&config.depth)?;
    let coint_test = coint_registry().get(&config.coint_test)?;
    let mut all_txs = load_all_transactions(&config.transactions)?;
    let all_prices = load_all_prices(&config.prices)?;

    let tokens: Vec<String> = if config.tokens.is_empty() {
        all_txs
            .keys()
            .filter(|t| all_prices.contains_key(*t))
            .cloned()
            .collect()
    } else {
        let mut wanted: Vec<String> = config.tokens.clone();
        wanted.sort();
        wanted.dedup();
        wanted
            .into_iter()
            .filter(|t| {
                let known = all_txs.contains_key(t) && all_prices.contains_key(t);
                if !known {
                    log::warn!("token `{t}` lacks transactions or prices; skipped");
                }
                known
            })
            .collect()
    };
    if tokens.is_empty() {
        log::warn!("no tokens to process");
    }

    let work: Vec<(String, Vec<TokenTransaction>)> = tokens
        .iter()
        .map(|t| (t.clone(), all_txs.remove(t).unwrap_or_default()))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
    let results: Vec<(String, std::result::Result<TokenOutput, StageError>)> = pool.install(|| {
        work.par_iter()
            .map(|(token, txs)| {
                log::info!("processing {token}: {} transactions", txs.len());
                let r = process_token(token, txs, &all_prices[token], config, measure.as_ref());
                (token.clone(), r)
            })
            .collect()
    });

    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    for (token, r) in results {
        match r {
            Ok(out) => outputs.push((token, out)),
            Err(e) => {
                log::error!("token {}: {} stage failed: {}", e.token, e.stage, e.message);
                errors.push(e);
            }
        }
    }

    let coint: ProtocolReport = pool.install(|| {
        pairwise_protocol(
            &cointegration_inputs(&outputs, &all_prices),
            config.coint_channel,
            coint_test.as_ref(),
        )
    });

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "horizons": config.horizons(),
        "models": config.models().iter().map(|m| m.name()).collect::<Vec<_>>(),
        "depth_measures": depth_registry().names(),
        "cointegration_tests": coint_registry().names(),
        "tokens_processed": outputs.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(),
        "token_errors": errors,
        "outputs": OUTPUT_FILES,
    });

    std::fs::create_dir_all(&config.out_dir)?;
    let dir = config.out_dir.as_path();
    write_atomic(
        dir,
        "features.csv",
        features_csv(&outputs, config.tx_count_column).as_bytes(),
    )?;
    write_atomic(dir, "betti_curves.csv", curves_csv(&outputs).as_bytes())?;
    write_atomic(
        dir,
        "predictions.csv",
        predictions_csv(&outputs, config.features.label.horizon).as_bytes(),
    )?;
    write_atomic(
        dir,
        "metrics.json",
        &to_json(&metrics_doc(&outputs, config, &errors))?,
    )?;
    write_atomic(dir, "cointegration.json", &to_json(&coint)?)?;
    write_atomic(dir, "manifest.json", &to_json(&manifest)?)?;

    Ok(RunSummary {
        tokens_processed: outputs.into_iter().map(|(t, _)| t).collect(),
        token_errors: errors,
        out_dir: config.out_dir.clone(),
    })
}
