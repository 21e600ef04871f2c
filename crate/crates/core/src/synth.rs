//! Synthetic token histories with planted transaction-topology regimes.
//!
//! Every day's graph has the same structural recipe: a hub with a fixed set
//! of leaves, a planted clique and sparse random edges. Only the amounts
//! differ between regimes. On ordinary days the hub edges carry the large
//! transfers; for one or two days before each price shock the clique does.
//! Edge and node counts and clustering therefore follow one distribution
//! regardless of regime, while the order in which edges enter the
//! filtration does not.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{PriceSeries, TokenTransaction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: usize,
    pub start: NaiveDate,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub hub_leaves: usize,
    pub clique_size: usize,
    /// Probability of each extra random edge.
    pub edge_prob: f64,
    /// Inclusive range of days between consecutive shocks.
    pub shock_gap: (usize, usize),
    /// Inclusive range of burst days preceding each shock.
    pub lead: (usize, usize),
    /// Standard deviation of ordinary daily returns.
    pub volatility: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 300,
            start: NaiveDate::from_ymd_opt(2017, 6, 1).unwrap(),
            min_nodes: 46,
            max_nodes: 54,
            hub_leaves: 20,
            clique_size: 7,
            edge_prob: 0.04,
            shock_gap: (12, 24),
            lead: (1, 2),
            volatility: 0.04,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthToken {
    pub token: String,
    pub transactions: Vec<TokenTransaction>,
    pub prices: PriceSeries,
    pub shock_days: Vec<NaiveDate>,
    pub burst_days: BTreeSet<NaiveDate>,
}

fn day_at(cfg: &SynthConfig, i: usize) -> NaiveDate {
    cfg.start + Days::new(i as u64)
}

fn schedule(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, BTreeSet<usize>) {
    let mut shocks = Vec::new();
    let mut bursts = BTreeSet::new();
    let mut t = 10 + rng.random_range(0..cfg.shock_gap.0.max(1));
    while t < cfg.days {
        shocks.push(t);
        let lead = rng.random_range(cfg.lead.0..=cfg.lead.1);
        for k in 1..=lead {
            if let Some(b) = t.checked_sub(k) {
                bursts.insert(b);
            }
        }
        t += rng.random_range(cfg.shock_gap.0..=cfg.shock_gap.1);
    }
    (shocks, bursts)
}

fn prices(cfg: &SynthConfig, token: &str, shocks: &[usize], rng: &mut ChaCha8Rng) -> PriceSeries {
    let noise = Normal::new(0.0, cfg.volatility).expect("valid volatility");
    let mut p: f64 = rng.random_range(0.5..5.0);
    let mut entries = Vec::with_capacity(cfg.days);
    for i in 0..cfg.days {
        if i > 0 {
            let r = if shocks.binary_search(&i).is_ok() {
                let size = rng.random_range(0.30..0.45);
                if rng.random_bool(0.5) {
                    size
                } else {
                    -size
                }
            } else {
                noise.sample(rng).clamp(-0.15, 0.15)
            };
            p *= 1.0 + r;
        }
        entries.push((day_at(cfg, i), p));
    }
    PriceSeries::new(token, entries).expect("positive synthetic prices")
}

fn day_transactions(
    cfg: &SynthConfig,
    token: &str,
    date: NaiveDate,
    burst: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<TokenTransaction> {
    let n = rng.random_range(cfg.min_nodes..=cfg.max_nodes);
    let hub_end = 1 + cfg.hub_leaves;
    let clique = hub_end..hub_end + cfg.clique_size;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut heavy: BTreeSet<(usize, usize)> = BTreeSet::new();
    for leaf in 1..hub_end {
        edges.insert((0, leaf));
        if !burst {
            heavy.insert((0, leaf));
        }
    }
    for a in clique.clone() {
        for b in a + 1..clique.end {
            edges.insert((a, b));
            if burst {
                heavy.insert((a, b));
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(cfg.edge_prob) {
                edges.insert((a, b));
            }
        }
    }
    // every remaining node trades at least once
    for v in clique.end..n {
        if !edges.iter().any(|&(a, b)| a == v || b == v) {
            let mut u = rng.random_range(0..n - 1);
            if u >= v {
                u += 1;
            }
            edges.insert((u.min(v), u.max(v)));
        }
    }

    let base = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    let addr = |i: usize| format!("0x{token}{i:04x}");
    let mut out = Vec::new();
    for &(a, b) in &edges {
        let total = if heavy.contains(&(a, b)) {
            rng.random_range(50.0..100.0)
        } else {
            rng.random_range(1.0..10.0)
        };
        let parts = rng.random_range(1..=3);
        for _ in 0..parts {
            let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            out.push(TokenTransaction {
                token: token.to_string(),
                from: addr(from),
                to: addr(to),
                amount: total / parts as f64,
                timestamp: base + rng.random_range(0..86_400),
            });
        }
    }
    out.sort_by_key(|t| t.timestamp);
    out
}

/// One synthetic token. Identical `(token, cfg, seed)` give identical output.
pub fn generate_token(token: &str, cfg: &SynthConfig, seed: u64) -> SynthToken {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (shocks, bursts) = schedule(cfg, &mut rng);
    let prices = prices(cfg, token, &shocks, &mut rng);
    let mut transactions = Vec::new();
    for i in 0..cfg.days {
        transactions.extend(day_transactions(
            cfg,
            token,
            day_at(cfg, i),
            bursts.contains(&i),
            &mut rng,
        ));
    }
    SynthToken {
        token: token.to_string(),
        transactions,
        prices,
        shock_days: shocks.iter().map(|&i| day_at(cfg, i)).collect(),
        burst_days: bursts.iter().map(|&i| day_at(cfg, i)).collect(),
    }
}

/// Writes transactions in the `token,from,to,amount,timestamp` layout.
pub fn write_transactions(path: &Path, txs: &[TokenTransaction]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "token,from,to,amount,timestamp")?;
    for t in txs {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.token, t.from, t.to, t.amount, t.timestamp
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes prices in the `token,date,open` layout.
pub fn write_prices(path: &Path, series: &[&PriceSeries]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "token,date,open")?;
    for s in series {
        for (d, p) in s.entries() {
            writeln!(w, "{},{},{}", s.token, d, p)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{graph_summaries, price_return};
    use crate::ingest::{build_daily_graph, group_by_day};

    #[test]
    fn deterministic_and_shaped() {
        let cfg = SynthConfig {
            days: 60,
            ..Default::default()
        };
        let a = generate_token("aaa", &cfg, 7);
        let b = generate_token("aaa", &cfg, 7);
        assert_eq!(a.transactions, b.transactions);
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.prices.len(), 60);
        assert!(!a.shock_days.is_empty());
        for s in &a.shock_days {
            assert!(price_return(&a.prices, *s).unwrap().abs() >= 0.25);
        }
        for (d, _) in a.prices.entries().iter().skip(1) {
            if !a.shock_days.contains(d) {
                assert!(price_return(&a.prices, *d).unwrap().abs() < 0.25);
            }
        }
    }

    #[test]
    fn regimes_share_structure() {
        let cfg = SynthConfig {
            days: 40,
            ..Default::default()
        };
        let t = generate_token("bbb", &cfg, 3);
        let days = group_by_day(&t.transactions);
        assert_eq!(days.len(), 40);
        for (d, txs) in days {
            let g = build_daily_graph(&txs, "bbb", d, 9.0).unwrap();
            let s = graph_summaries(&g);
            assert!((cfg.min_nodes..=cfg.max_nodes).contains(&s.nv));
            assert!(s.ne >= cfg.hub_leaves + 21);
        }
    }
}
