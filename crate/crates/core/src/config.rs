//! Run configuration: hyperparameters, date ranges, and trading regime.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constraint set a weight vector must satisfy.
///
/// `LongOnly` and `LongShort` are the two regimes the agent trades under.
/// `Budget` (weights sum to one, signs free) is emitted only by the
/// unconstrained minimum-variance baseline and is never a valid agent regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LongOnly,
    LongShort,
    Budget,
}

/// Inclusive calendar interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Benchmark series used for alpha/beta: a single asset or the
/// equal-weight portfolio of the configured universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Benchmark {
    EqualWeight,
    Asset(String),
}

impl From<String> for Benchmark {
    fn from(s: String) -> Self {
        if s == "equal_weight" {
            Benchmark::EqualWeight
        } else {
            Benchmark::Asset(s)
        }
    }
}

impl From<Benchmark> for String {
    fn from(b: Benchmark) -> Self {
        match b {
            Benchmark::EqualWeight => "equal_weight".to_string(),
            Benchmark::Asset(id) => id,
        }
    }
}

/// Full run configuration. Loaded from a strict JSON file: unknown keys
/// are rejected so hyperparameter typos fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Path to the CSV price snapshot (`date,<asset>,...`).
    pub data: PathBuf,
    /// Optional universe restriction; `None` keeps every column.
    #[serde(default)]
    pub assets: Option<Vec<String>>,
    pub train_range: DateRange,
    pub test_range: DateRange,
    /// Trailing window (days) for moving averages and correlations.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_decay")]
    pub epsilon_decay: f64,
    #[serde(default = "default_epsilon_floor")]
    pub epsilon_floor: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    /// Discount on the bootstrapped next-state value; 0 trains on raw
    /// per-asset rewards only.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_benchmark")]
    pub benchmark: Benchmark,
    /// Per-annum risk-free rate used by Sharpe/alpha.
    #[serde(default)]
    pub risk_free_rate: f64,
    #[serde(default = "default_initial_investment")]
    pub initial_investment: f64,
    /// Feed detrended prices into states (rewards always use raw prices).
    #[serde(default = "default_true")]
    pub detrend_features: bool,
    /// Ridge added to the covariance diagonal in the min-variance solve.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_window() -> usize {
    10
}
fn default_buffer_capacity() -> usize {
    32
}
fn default_episodes() -> usize {
    1000
}
fn default_epsilon_start() -> f64 {
    1.0
}
fn default_epsilon_decay() -> f64 {
    0.995
}
fn default_epsilon_floor() -> f64 {
    0.01
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_hidden_dims() -> Vec<usize> {
    vec![128, 64]
}
fn default_regime() -> Regime {
    Regime::LongOnly
}
fn default_benchmark() -> Benchmark {
    Benchmark::EqualWeight
}
fn default_initial_investment() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_ridge() -> f64 {
    1e-8
}

impl Config {
    /// Validate field domains and cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));

        if self.window < 2 {
            return fail(format!("window must be >= 2, got {}", self.window));
        }
        if self.buffer_capacity == 0 {
            return fail("buffer_capacity must be positive".into());
        }
        if self.episodes == 0 {
            return fail("episodes must be positive".into());
        }
        if !(self.epsilon_floor > 0.0
            && self.epsilon_floor <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return fail(format!(
                "epsilon bounds violated: need 0 < floor <= start <= 1, got floor={} start={}",
                self.epsilon_floor, self.epsilon_start
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return fail(format!(
                "epsilon_decay must be in (0, 1], got {}",
                self.epsilon_decay
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!(
                "learning_rate must be a positive real, got {}",
                self.learning_rate
            ));
        }
        if self.hidden_dims.contains(&0) {
            return fail("hidden_dims entries must be positive".into());
        }
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return fail(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        if self.regime == Regime::Budget {
            return fail("regime must be long_only or long_short".into());
        }
        if !self.risk_free_rate.is_finite() {
            return fail("risk_free_rate must be finite".into());
        }
        if !(self.initial_investment.is_finite() && self.initial_investment > 0.0) {
            return fail(format!(
                "initial_investment must be positive, got {}",
                self.initial_investment
            ));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return fail(format!("ridge must be non-negative, got {}", self.ridge));
        }
        if self.train_range.start > self.train_range.end {
            return fail("train_range start is after its end".into());
        }
        if self.test_range.start > self.test_range.end {
            return fail("test_range start is after its end".into());
        }
        if self.train_range.end >= self.test_range.start {
            return fail("train_range must precede test_range without overlap".into());
        }
        if let Some(assets) = &self.assets {
            if assets.is_empty() {
                return fail("assets filter must not be empty when present".into());
            }
        }
        Ok(())
    }
}
