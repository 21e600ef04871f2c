mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::{oracle_betti, probe_scales, WeightedGraph};
use tokencurves::ingest::{build_daily_graph, group_by_day, load_all_transactions, top_k_filter};
use tokencurves::pipeline::{run_pipeline, PipelineConfig, OUTPUT_FILES};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(
        fixture("transactions.csv"),
        fixture("prices.csv"),
        out.to_path_buf(),
    );
    c.forest.trees = 100;
    c.forest.seed = 17;
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tokencurves"))
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn fixture_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&config(dir.path())).unwrap();
    assert_eq!(summary.tokens_processed, vec!["tok0", "tok1"]);
    assert!(summary.token_errors.is_empty());
    for f in OUTPUT_FILES {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let features = read(dir.path(), "features.csv");
    assert_eq!(
        features.lines().next().unwrap(),
        "token,date,pn,ne,nv,gc,rd0,rd1,rd2,label"
    );
    assert_eq!(features.lines().count(), 1 + 2 * 42);
    let preds = read(dir.path(), "predictions.csv");
    assert_eq!(
        preds.lines().next().unwrap(),
        "token,date,model,vote_fraction,prediction,label"
    );

    let metrics: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "metrics.json")).unwrap();
    for token in ["tok0", "tok1"] {
        for model in ["M1", "M2", "M3", "M4"] {
            let m = &metrics["tokens"][token]["horizons"]["2"]["models"][model];
            assert!(m["accuracy"].is_number(), "{token} {model}: {m}");
        }
    }
    let coint: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "cointegration.json")).unwrap();
    assert_eq!(coint["pairs"].as_array().unwrap().len(), 1);
}

/// Parses `betti_curves.csv` into (token, date, dim) -> step rows.
fn parse_curves(text: &str) -> BTreeMap<(String, String, usize), Vec<(f64, usize)>> {
    let mut out: BTreeMap<_, Vec<(f64, usize)>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        out.entry((f[0].to_string(), f[1].to_string(), f[2].parse().unwrap()))
            .or_default()
            .push((f[3].parse().unwrap(), f[4].parse().unwrap()));
    }
    out
}

fn step_value(steps: &[(f64, usize)], eps: f64) -> usize {
    steps.iter().rev().find(|(b, _)| *b <= eps).unwrap().1
}

#[test]
fn fixture_curves_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path())).unwrap();
    let curves = parse_curves(&read(dir.path(), "betti_curves.csv"));
    let all = load_all_transactions(&fixture("transactions.csv")).unwrap();
    let mut checked = 0;
    for (token, txs) in &all {
        for (date, day_txs) in group_by_day(txs) {
            let g = top_k_filter(&build_daily_graph(&day_txs, token, date, 9.0).unwrap(), 150);
            let index: BTreeMap<&str, usize> = g
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_str(), i))
                .collect();
            let n = index.len();
            let mut w = vec![vec![None; n]; n];
            for ((a, b), e) in &g.edges {
                w[index[a.as_str()]][index[b.as_str()]] = Some(e.weight);
                w[index[b.as_str()]][index[a.as_str()]] = Some(e.weight);
            }
            let wg = WeightedGraph { n, w };
            for eps in probe_scales(&wg) {
                let expected = oracle_betti(&wg, eps, 2);
                for (p, want) in expected.iter().enumerate() {
                    let steps = &curves[&(token.clone(), date.to_string(), p)];
                    assert_eq!(
                        step_value(steps, eps),
                        *want,
                        "{token} {date} dim {p} eps {eps}"
                    );
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 84);
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = config(a.path());
    ca.jobs = Some(1);
    let mut cb = config(b.path());
    cb.jobs = Some(4);
    run_pipeline(&ca).unwrap();
    run_pipeline(&cb).unwrap();
    for f in OUTPUT_FILES.iter().filter(|f| **f != "manifest.json") {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn missing_prices_is_an_input_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["--transactions"])
        .arg(fixture("transactions.csv"))
        .arg("--prices")
        .arg(dir.path().join("nope.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("nope.csv"));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn unknown_token_succeeds_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("--transactions")
        .arg(fixture("transactions.csv"))
        .arg("--prices")
        .arg(fixture("prices.csv"))
        .arg("--out")
        .arg(dir.path())
        .args(["--token", "unknown", "--trees", "10"])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stderr)
        .to_lowercase()
        .contains("unknown"));
    assert_eq!(read(dir.path(), "features.csv").lines().count(), 1);
}

#[test]
fn a_short_token_does_not_disturb_the_other() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    // keep only two price days for tok1, too few to split
    let text: String = read(&fixture(""), "prices.csv")
        .lines()
        .filter(|l| !l.starts_with("tok1") || l.contains("2017-06-01") || l.contains("2017-06-02"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&prices, text).unwrap();

    let both = dir.path().join("both");
    let mut c = config(&both);
    c.prices = prices.clone();
    run_pipeline(&c).unwrap();
    let alone = dir.path().join("alone");
    let mut c = config(&alone);
    c.prices = prices;
    c.tokens = vec!["tok0".into()];
    run_pipeline(&c).unwrap();

    let m_both: serde_json::Value = serde_json::from_str(&read(&both, "metrics.json")).unwrap();
    let m_alone: serde_json::Value = serde_json::from_str(&read(&alone, "metrics.json")).unwrap();
    assert_eq!(m_both["tokens"]["tok0"], m_alone["tokens"]["tok0"]);
    let tok1 = &m_both["tokens"]["tok1"]["horizons"]["2"]["models"]["M1"];
    assert!(tok1["skipped"].is_string(), "{tok1}");
    let tok0_rows = |dir: &Path| {
        read(dir, "features.csv")
            .lines()
            .filter(|l| l.starts_with("tok0"))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(tok0_rows(&both), tok0_rows(&alone));
}

#[test]
fn synth_subcommand_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "synth", "--tokens", "1", "--days", "15", "--seed", "4", "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(dir.path(), "prices.csv").lines().count(), 16);
    let bad = bin()
        .args(["synth", "--min-nodes", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
