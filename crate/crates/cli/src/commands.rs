//! Pipeline commands behind the CLI verbs: ingest, train, backtest,
//! compare. Every command is a plain function over a validated [`Config`]
//! so the integration suite can drive them without spawning processes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use serde::Serialize;

use qfolio_core::agent::WeightVector;
use qfolio_core::analytics::{
    compute_metrics, equal_weights, max_return_weights, min_variance_weights, MetricsReport,
};
use qfolio_core::config::{Benchmark, Config};
use qfolio_core::environment::{Environment, EpisodeLog, Split};
use qfolio_core::error::Error;
use qfolio_core::market_data::{
    drop_incomplete_rows, load_price_table, simple_returns, PriceTable, ReturnTable,
};
use qfolio_core::qnet::QNetwork;
use qfolio_core::trainer::{fixed_weight_backtest, greedy_backtest, network_dims, train};

use crate::manifest::RunManifest;

/// Failure classes mapped to process exit codes (0 is success).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Numeric,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Config,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let kind = match &err {
            Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Json(_) => FailureKind::Config,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::UnknownAsset(_)
            | Error::InsufficientHistory { .. }
            | Error::IncompleteData { .. }
            | Error::OutOfRange { .. } => FailureKind::Data,
            Error::InvalidWeights(_)
            | Error::NonFinite(_)
            | Error::NonFiniteLoss { .. }
            | Error::TrainingAborted { .. }
            | Error::SingularMatrix { .. }
            | Error::InvalidReturn(_) => FailureKind::Numeric,
        };
        Self {
            kind,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Load, parse, and validate the strict JSON config, applying an optional
/// seed override before anything else sees it.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> CliResult<Config> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read config `{}`: {e}", path.display())))?;
    let mut config: Config = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("config `{}`: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        config.rng_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load_raw_table(config: &Config) -> CliResult<PriceTable> {
    Ok(load_price_table(&config.data, config.assets.as_deref())?)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| {
        CliError::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn ensure_out_dir(out_dir: &Path) -> CliResult<()> {
    fs::create_dir_all(out_dir).map_err(|source| {
        CliError::from(Error::Io {
            path: out_dir.to_path_buf(),
            source,
        })
    })
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

/// First/last date with a valid (finite, positive) observation per asset.
#[derive(Debug, Clone, Serialize)]
pub struct AssetSpan {
    pub asset: String,
    pub first: Option<NaiveDate>,
    pub last: Option<NaiveDate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub num_assets: usize,
    pub rows_raw: usize,
    pub rows_filtered: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub asset_spans: Vec<AssetSpan>,
}

/// Validate the dataset and report its shape before and after NA filtering.
pub fn cmd_ingest(config: &Config) -> CliResult<IngestSummary> {
    let raw = load_raw_table(config)?;
    let filtered = drop_incomplete_rows(&raw, config.window + 2)?;

    let asset_spans = (0..raw.num_assets())
        .map(|i| {
            let valid = |t: usize| {
                let p = raw.price(t, i);
                p.is_finite() && p > 0.0
            };
            let first = (0..raw.num_rows()).find(|&t| valid(t)).map(|t| raw.date(t));
            let last = (0..raw.num_rows())
                .rev()
                .find(|&t| valid(t))
                .map(|t| raw.date(t));
            AssetSpan {
                asset: raw.assets()[i].clone(),
                first,
                last,
            }
        })
        .collect();

    Ok(IngestSummary {
        num_assets: raw.num_assets(),
        rows_raw: raw.num_rows(),
        rows_filtered: filtered.num_rows(),
        train_rows: filtered.rows_in_range(&config.train_range).len(),
        test_rows: filtered.rows_in_range(&config.test_range).len(),
        asset_spans,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Run the episode loop over the training range and write checkpoint,
/// loss log, and manifest into `out_dir`.
pub fn cmd_train(config: &Config, out_dir: &Path) -> CliResult<RunManifest> {
    let started = Instant::now();
    let table = load_raw_table(config)?;
    let mut env = Environment::for_split(&table, config, Split::Train)?;
    let result = train(&mut env, config)?;

    ensure_out_dir(out_dir)?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    result.network.save(&checkpoint_path)?;

    let loss_log_path = out_dir.join("loss_log.csv");
    let mut csv = Vec::new();
    writeln!(
        csv,
        "episode,epsilon,mean_loss,cumulative_reward,final_value"
    )
    .expect("in-memory write");
    for record in &result.episodes {
        let loss = record
            .mean_loss
            .map(|l| l.to_string())
            .unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{}",
            record.episode, record.epsilon, loss, record.cumulative_reward, record.final_value
        )
        .expect("in-memory write");
    }
    write_file(&loss_log_path, &csv)?;

    let mut manifest = RunManifest::new(config, &config.data)?;
    manifest.record_artifact("checkpoint", &checkpoint_path);
    manifest.record_artifact("loss_log", &loss_log_path);
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    let manifest_path = out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    Ok(manifest)
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

fn load_checkpoint_for(env: &Environment, config: &Config, path: &Path) -> CliResult<QNetwork> {
    let network = QNetwork::load(path)?;
    let expected = network_dims(env, config);
    if network.dims() != expected.as_slice() {
        return Err(CliError::config(format!(
            "checkpoint dims {:?} incompatible with configured dims {:?}",
            network.dims(),
            expected
        )));
    }
    Ok(network)
}

/// Benchmark daily returns over exactly the steps a backtest acts on,
/// computed through the same fixed-weight path as the strategies.
fn benchmark_series(env: &Environment, config: &Config) -> CliResult<Vec<f64>> {
    let weights = match &config.benchmark {
        Benchmark::EqualWeight => equal_weights(env.num_assets())?,
        Benchmark::Asset(id) => {
            let index = env
                .raw_table()
                .asset_index(id)
                .ok_or_else(|| CliError::from(Error::UnknownAsset(id.clone())))?;
            let mut w = vec![0.0; env.num_assets()];
            w[index] = 1.0;
            WeightVector::new(w, qfolio_core::config::Regime::LongOnly)?
        }
    };
    let log = fixed_weight_backtest(env, weights.weights(), 1.0)?;
    Ok(log.portfolio_returns())
}

/// Evaluate a checkpoint greedily (epsilon = 0) over the test range,
/// writing the equity curve CSV and metrics JSON.
pub fn cmd_backtest(
    config: &Config,
    checkpoint: &Path,
    out_dir: &Path,
) -> CliResult<(MetricsReport, EpisodeLog)> {
    let table = load_raw_table(config)?;
    let mut env = Environment::for_split(&table, config, Split::Test)?;
    let network = load_checkpoint_for(&env, config, checkpoint)?;

    let log = greedy_backtest(&mut env, &network)?;
    let benchmark = benchmark_series(&env, config)?;
    let metrics = compute_metrics(
        &log.portfolio_returns(),
        &benchmark,
        config.risk_free_rate,
        config.initial_investment,
    )?;

    ensure_out_dir(out_dir)?;
    let mut equity_csv = Vec::new();
    log.write_csv(&mut equity_csv)?;
    write_file(&out_dir.join("equity.csv"), &equity_csv)?;
    let metrics_json = serde_json::to_vec_pretty(&metrics).map_err(Error::from)?;
    write_file(&out_dir.join("metrics.json"), &metrics_json)?;

    Ok((metrics, log))
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub strategy: String,
    pub outcome: Result<MetricsReport, String>,
}

/// Evaluate the trained agent and the classical baselines on the identical
/// test range. Baseline weights are estimated on the training range and
/// held fixed; a failing strategy yields a `failed` row without blocking
/// the others.
pub fn cmd_compare(
    config: &Config,
    checkpoint: &Path,
    out_dir: &Path,
) -> CliResult<Vec<ComparisonRow>> {
    let table = load_raw_table(config)?;
    let filtered = drop_incomplete_rows(&table, config.window + 2)?;
    let train_returns = simple_returns(&filtered.slice_rows(filtered.rows_in_range(&config.train_range)))?;

    let env = Environment::for_split(&table, config, Split::Test)?;
    let network = load_checkpoint_for(&env, config, checkpoint)?;
    let benchmark = benchmark_series(&env, config)?;

    let evaluate_fixed = |weights: &WeightVector| -> Result<MetricsReport, Error> {
        let log = fixed_weight_backtest(&env, weights.weights(), config.initial_investment)?;
        compute_metrics(
            &log.portfolio_returns(),
            &benchmark,
            config.risk_free_rate,
            config.initial_investment,
        )
    };

    let drl = || -> Result<MetricsReport, Error> {
        let mut eval_env = env.clone();
        let log = greedy_backtest(&mut eval_env, &network)?;
        compute_metrics(
            &log.portfolio_returns(),
            &benchmark,
            config.risk_free_rate,
            config.initial_investment,
        )
    };
    let min_variance = || -> Result<MetricsReport, Error> {
        evaluate_fixed(&min_variance_weights(&train_returns, config.ridge)?)
    };
    let max_return =
        || -> Result<MetricsReport, Error> { evaluate_fixed(&max_return_weights(&train_returns)?) };
    let equal = || -> Result<MetricsReport, Error> {
        evaluate_fixed(&equal_weights(env.num_assets())?)
    };

    let rows = vec![
        ComparisonRow {
            strategy: "drl".into(),
            outcome: drl().map_err(|e| e.to_string()),
        },
        ComparisonRow {
            strategy: "min_variance".into(),
            outcome: min_variance().map_err(|e| e.to_string()),
        },
        ComparisonRow {
            strategy: "max_return".into(),
            outcome: max_return().map_err(|e| e.to_string()),
        },
        ComparisonRow {
            strategy: "equal_weight".into(),
            outcome: equal().map_err(|e| e.to_string()),
        },
    ];

    ensure_out_dir(out_dir)?;
    write_file(
        &out_dir.join("comparison.csv"),
        comparison_csv(&rows).as_bytes(),
    )?;
    Ok(rows)
}

/// Render the comparison table. Undefined alpha/beta cells stay empty;
/// a failed strategy fills every numeric cell with `failed`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("strategy,mean_daily,vol_annual,sharpe,alpha_daily,beta,final_value\n");
    for row in rows {
        match &row.outcome {
            Ok(m) => {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.strategy,
                    m.mean_daily_return,
                    m.volatility_annualized,
                    m.sharpe_annualized,
                    opt(m.alpha_daily),
                    opt(m.beta),
                    m.final_value
                ));
            }
            Err(_) => {
                out.push_str(&format!(
                    "{},failed,failed,failed,failed,failed,failed\n",
                    row.strategy
                ));
            }
        }
    }
    out
}

/// Write a generated synthetic market to `path` in the ingestible layout.
pub fn write_table_csv(table: &PriceTable, path: &Path) -> CliResult<()> {
    let mut bytes = Vec::new();
    qfolio_core::market_data::write_price_table(table, &mut bytes)?;
    write_file(path, &bytes)
}

/// Training-range returns shared by baseline estimation in tests.
pub fn training_returns(config: &Config) -> CliResult<ReturnTable> {
    let table = load_raw_table(config)?;
    let filtered = drop_incomplete_rows(&table, config.window + 2)?;
    Ok(simple_returns(
        &filtered.slice_rows(filtered.rows_in_range(&config.train_range)),
    )?)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
