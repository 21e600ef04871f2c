use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tokencurves::cointegration::Channel;
use tokencurves::features::{FeatureConfig, LabelSpec};
use tokencurves::forecast::{ForestParams, MtryRule};
use tokencurves::homology::FiltrationSpec;
use tokencurves::ingest::AmountNormalization;
use tokencurves::pipeline::{run_pipeline, PipelineConfig};
use tokencurves::synth::{generate_token, write_prices, write_transactions, SynthConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_TOKEN_FAILURES: u8 = 3;

#[derive(Parser, Debug)]
#[command(author, version, about, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic transactions/prices dataset with planted regimes.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    transactions: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to these tokens (repeatable).
    #[arg(long = "token")]
    tokens: Vec<String>,
    #[arg(long, default_value_t = 150)]
    k: usize,
    #[arg(long, default_value_t = 9.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    /// Additional horizons reported in metrics.json.
    #[arg(long = "extra-horizon")]
    extra_horizons: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    window: usize,
    #[arg(long = "max-dim", default_value_t = 2)]
    max_dim: usize,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// auto (floor of sqrt of the feature count), all, or an integer.
    #[arg(long, default_value = "auto")]
    mtry: MtryRule,
    #[arg(long = "min-leaf", default_value_t = 1)]
    min_leaf: usize,
    #[arg(long = "balance-classes")]
    balance_classes: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training share of each token's rows; exactly 2/3 when omitted.
    #[arg(long = "train-frac")]
    train_frac: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Largest horizon scanned against --rho (0 disables the scan).
    #[arg(long = "h-max", default_value_t = 7)]
    h_max: usize,
    #[arg(long = "coint-channel", default_value = "rd1")]
    coint_channel: Channel,
    #[arg(long = "coint-test", default_value = "hidden")]
    coint_test: String,
    #[arg(long, default_value = "mbd")]
    depth: String,
    #[arg(long = "amount-normalization", value_enum, default_value_t = AmountNormalization::PostFilter)]
    amount_normalization: AmountNormalization,
    #[arg(long)]
    jobs: Option<usize>,
    /// Append the raw daily transaction count to features.csv.
    #[arg(long = "tx-count-column")]
    tx_count_column: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    tokens: usize,
    #[arg(long, default_value_t = 300)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest daily node count.
    #[arg(long, default_value_t = SynthConfig::default().min_nodes)]
    min_nodes: usize,
    /// Largest daily node count.
    #[arg(long, default_value_t = SynthConfig::default().max_nodes)]
    max_nodes: usize,
    #[arg(long, default_value_t = SynthConfig::default().hub_leaves)]
    hub_leaves: usize,
    #[arg(long, default_value_t = SynthConfig::default().clique_size)]
    clique_size: usize,
}

impl RunArgs {
    fn into_config(self) -> Result<PipelineConfig, String> {
        let need =
            |p: Option<PathBuf>, flag: &str| p.ok_or_else(|| format!("--{flag} is required"));
        let mut config = PipelineConfig::new(
            need(self.transactions, "transactions")?,
            need(self.prices, "prices")?,
            need(self.out, "out")?,
        );
        config.tokens = self.tokens;
        config.features = FeatureConfig {
            k: self.k,
            alpha: self.alpha,
            window: self.window,
            filtration: FiltrationSpec {
                max_homology_dim: self.max_dim,
                ..FiltrationSpec::default()
            },
            label: LabelSpec {
                delta: self.delta,
                horizon: self.horizon,
            },
            normalization: self.amount_normalization,
        };
        config.extra_horizons = self.extra_horizons;
        config.forest = ForestParams {
            trees: self.trees,
            mtry: self.mtry,
            seed: self.seed,
            min_leaf: self.min_leaf,
            balance_classes: self.balance_classes,
        };
        config.train_frac = self.train_frac;
        config.rho = self.rho;
        config.h_max = self.h_max;
        config.coint_channel = self.coint_channel;
        config.coint_test = self.coint_test;
        config.depth = self.depth;
        config.jobs = self.jobs;
        config.tx_count_column = self.tx_count_column;
        Ok(config)
    }
}

fn synth(args: SynthArgs) -> tokencurves::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let cfg = SynthConfig {
        days: args.days,
        min_nodes: args.min_nodes,
        max_nodes: args.max_nodes,
        hub_leaves: args.hub_leaves,
        clique_size: args.clique_size,
        ..SynthConfig::default()
    };
    if cfg.min_nodes > cfg.max_nodes || 1 + cfg.hub_leaves + cfg.clique_size > cfg.min_nodes {
        return Err(tokencurves::Error::Domain(
            "node range must hold the hub, its leaves and the clique".into(),
        ));
    }
    let tokens: Vec<_> = (0..args.tokens)
        .map(|i| generate_token(&format!("tok{i}"), &cfg, args.seed.wrapping_add(i as u64)))
        .collect();
    let txs: Vec<_> = tokens
        .iter()
        .flat_map(|t| t.transactions.iter().cloned())
        .collect();
    write_transactions(&args.out.join("transactions.csv"), &txs)?;
    write_prices(
        &args.out.join("prices.csv"),
        &tokens.iter().map(|t| &t.prices).collect::<Vec<_>>(),
    )?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(Command::Synth(args)) = cli.command {
        return match synth(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        };
    }
    let config = match cli.run.into_config() {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run_pipeline(&config) {
        Ok(summary) if summary.token_errors.is_empty() => {
            eprintln!(
                "processed {} token(s); outputs in {}",
                summary.tokens_processed.len(),
                summary.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Ok(summary) => {
            for e in &summary.token_errors {
                eprintln!(
                    "error: token={} stage={} date={} {}",
                    e.token,
                    e.stage,
                    e.date.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
                    e.message
                );
            }
            ExitCode::from(EXIT_TOKEN_FAILURES)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_FAILURE
            })
        }
    }
}
