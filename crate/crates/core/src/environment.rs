//! Episodic market environment: states from price features, weight
//! actions, per-asset rewards from raw prices, and portfolio tracking.
//!
//! States are assembled here with direct loops (no calls into the
//! `market_data` window primitives) so tests can cross-check segments
//! against that module as an independent route.

use std::io::Write;

use chrono::NaiveDate;

use crate::agent::WeightVector;
use crate::config::{Config, Regime};
use crate::error::{Error, Result};
use crate::market_data::{build_feature_table, drop_incomplete_rows, PriceTable};

/// Feature vector of length N(N+2) at one timestamp: detrended prices,
/// their trailing moving averages, and the flattened window correlation
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    t: usize,
    features: Vec<f64>,
}

impl State {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Next-day simple return per asset plus the weighted portfolio return.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    pub per_asset: Vec<f64>,
    pub portfolio: f64,
}

/// One executed step of a backtest or training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub date: NaiveDate,
    pub weights: Vec<f64>,
    pub portfolio_return: f64,
    pub portfolio_value: f64,
}

/// Per-step log of one pass over a date range.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub assets: Vec<String>,
    pub initial_investment: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn final_value(&self) -> f64 {
        self.steps
            .last()
            .map(|s| s.portfolio_value)
            .unwrap_or(self.initial_investment)
    }

    pub fn portfolio_returns(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.portfolio_return).collect()
    }

    /// Mean weight per asset over all steps.
    pub fn mean_weights(&self) -> Vec<f64> {
        let n = self.assets.len();
        let mut means = vec![0.0; n];
        for step in &self.steps {
            for (m, w) in means.iter_mut().zip(&step.weights) {
                *m += w;
            }
        }
        let count = self.steps.len().max(1) as f64;
        for m in means.iter_mut() {
            *m /= count;
        }
        means
    }

    /// CSV export: `step,date,portfolio_return,portfolio_value` plus one
    /// weight column per asset.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        let to_io = |source: std::io::Error| Error::Io {
            path: "<writer>".into(),
            source,
        };
        write!(writer, "step,date,portfolio_return,portfolio_value").map_err(to_io)?;
        for asset in &self.assets {
            write!(writer, ",w_{asset}").map_err(to_io)?;
        }
        writeln!(writer).map_err(to_io)?;
        for record in &self.steps {
            write!(
                writer,
                "{},{},{},{}",
                record.step, record.date, record.portfolio_return, record.portfolio_value
            )
            .map_err(to_io)?;
            for w in &record.weights {
                write!(writer, ",{w}").map_err(to_io)?;
            }
            writeln!(writer).map_err(to_io)?;
        }
        Ok(())
    }
}

/// Which configured date range an environment covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Market environment over one date range. The cursor and portfolio value
/// are the only mutable state; the underlying tables never change.
#[derive(Debug, Clone)]
pub struct Environment {
    raw: PriceTable,
    features: PriceTable,
    window: usize,
    regime: Regime,
    initial_investment: f64,
    cursor: usize,
    value: f64,
}

impl Environment {
    /// Build over aligned raw and feature tables. The raw table must be
    /// complete (rewards divide by its prices); both need window+1 rows.
    pub fn new(
        raw: PriceTable,
        features: PriceTable,
        window: usize,
        regime: Regime,
        initial_investment: f64,
    ) -> Result<Self> {
        if window < 2 {
            return Err(Error::InvalidArgument("window must be >= 2".into()));
        }
        if !(initial_investment.is_finite() && initial_investment > 0.0) {
            return Err(Error::InvalidArgument(
                "initial_investment must be positive".into(),
            ));
        }
        if raw.num_rows() != features.num_rows()
            || raw.num_assets() != features.num_assets()
            || raw.dates() != features.dates()
        {
            return Err(Error::DimensionMismatch {
                context: "raw vs feature table".into(),
                expected: raw.num_rows(),
                actual: features.num_rows(),
            });
        }
        if raw.num_rows() < window + 1 {
            return Err(Error::InsufficientHistory {
                needed: window + 1,
                actual: raw.num_rows(),
            });
        }
        if let Some((row, asset)) = raw.first_incomplete_cell() {
            return Err(Error::IncompleteData {
                row,
                asset: raw.assets()[asset].clone(),
            });
        }
        if features
            .dates()
            .iter()
            .enumerate()
            .any(|(t, _)| features.row(t).iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("feature table".into()));
        }
        let cursor = window - 1;
        let value = initial_investment;
        Ok(Self {
            raw,
            features,
            window,
            regime,
            initial_investment,
            cursor,
            value,
        })
    }

    /// Build the environment for one configured split. The detrend line is
    /// always fitted on the training rows so the test split never leaks
    /// information backward.
    pub fn for_split(table: &PriceTable, config: &Config, split: Split) -> Result<Self> {
        let filtered = drop_incomplete_rows(table, config.window + 2)?;
        let train_rows = filtered.rows_in_range(&config.train_range);
        let rows = match split {
            Split::Train => train_rows.clone(),
            Split::Test => filtered.rows_in_range(&config.test_range),
        };
        if rows.len() < config.window + 1 {
            return Err(Error::InsufficientHistory {
                needed: config.window + 1,
                actual: rows.len(),
            });
        }
        if config.detrend_features && train_rows.len() < 2 {
            return Err(Error::InsufficientHistory {
                needed: 2,
                actual: train_rows.len(),
            });
        }
        let features = build_feature_table(&filtered, train_rows, config.detrend_features)?;
        Environment::new(
            filtered.slice_rows(rows.clone()),
            features.slice_rows(rows),
            config.window,
            config.regime,
            config.initial_investment,
        )
    }

    pub fn num_assets(&self) -> usize {
        self.raw.num_assets()
    }

    pub fn num_rows(&self) -> usize {
        self.raw.num_rows()
    }

    pub fn assets(&self) -> &[String] {
        self.raw.assets()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// First timestamp with a full trailing window behind it.
    pub fn first_t(&self) -> usize {
        self.window - 1
    }

    pub fn last_t(&self) -> usize {
        self.raw.num_rows() - 1
    }

    pub fn current_t(&self) -> usize {
        self.cursor
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.raw.date(t)
    }

    pub fn portfolio_value(&self) -> f64 {
        self.value
    }

    pub fn initial_investment(&self) -> f64 {
        self.initial_investment
    }

    /// Raw price table for this range (reward source).
    pub fn raw_table(&self) -> &PriceTable {
        &self.raw
    }

    /// Feature table for this range (state source).
    pub fn feature_table(&self) -> &PriceTable {
        &self.features
    }

    /// Expected feature-vector length N(N+2).
    pub fn state_len(&self) -> usize {
        let n = self.num_assets();
        n * (n + 2)
    }

    /// Rewind to the first valid timestamp and restore the initial
    /// investment; returns the state there.
    pub fn reset(&mut self) -> State {
        self.cursor = self.first_t();
        self.value = self.initial_investment;
        self.state_at(self.cursor)
            .expect("first state exists by construction")
    }

    /// Deterministic state at `t`: detrended prices, their window means,
    /// and the flattened window correlation matrix.
    pub fn state_at(&self, t: usize) -> Result<State> {
        if t < self.first_t() || t > self.last_t() {
            return Err(Error::OutOfRange {
                index: t,
                min: self.first_t(),
                max: self.last_t(),
            });
        }
        let n = self.num_assets();
        let w = self.window;
        let mut features = Vec::with_capacity(self.state_len());

        // Segment A: feature prices at t.
        features.extend_from_slice(self.features.row(t));

        // Segment B: trailing window means of the feature prices.
        for i in 0..n {
            let sum: f64 = (t + 1 - w..=t).map(|r| self.features.price(r, i)).sum();
            features.push(sum / w as f64);
        }

        // Segment C: window Pearson correlations, row-major. Constant
        // windows contribute 0 off-diagonal and 1 on the diagonal.
        let means: Vec<f64> = (0..n)
            .map(|i| (t + 1 - w..=t).map(|r| self.features.price(r, i)).sum::<f64>() / w as f64)
            .collect();
        let mut sq_dev = vec![0.0; n];
        for (i, dev) in sq_dev.iter_mut().enumerate() {
            for r in t + 1 - w..=t {
                let d = self.features.price(r, i) - means[i];
                *dev += d * d;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let value = if i == j {
                    1.0
                } else if sq_dev[i] == 0.0 || sq_dev[j] == 0.0 {
                    0.0
                } else {
                    let mut cov = 0.0;
                    for r in t + 1 - w..=t {
                        cov += (self.features.price(r, i) - means[i])
                            * (self.features.price(r, j) - means[j]);
                    }
                    (cov / (sq_dev[i].sqrt() * sq_dev[j].sqrt())).clamp(-1.0, 1.0)
                };
                features.push(value);
            }
        }

        Ok(State { t, features })
    }

    /// Pure reward for acting with `action` at time `t`: each asset's
    /// t -> t+1 simple return from raw prices, and their weighted sum.
    pub fn reward_at(&self, action: &WeightVector, t: usize) -> Result<RewardVector> {
        if t < self.first_t() || t >= self.last_t() {
            return Err(Error::OutOfRange {
                index: t,
                min: self.first_t(),
                max: self.last_t().saturating_sub(1),
            });
        }
        self.check_action(action)?;
        let per_asset: Vec<f64> = (0..self.num_assets())
            .map(|i| self.raw.price(t + 1, i) / self.raw.price(t, i) - 1.0)
            .collect();
        let portfolio = action
            .weights()
            .iter()
            .zip(&per_asset)
            .map(|(w, r)| w * r)
            .sum();
        Ok(RewardVector {
            per_asset,
            portfolio,
        })
    }

    /// Advance one day under `action`. Compounds the portfolio value by
    /// (1 + portfolio return); no transaction costs of any kind.
    pub fn step(&mut self, action: &WeightVector) -> Result<(State, RewardVector, bool)> {
        if self.cursor >= self.last_t() {
            return Err(Error::OutOfRange {
                index: self.cursor,
                min: self.first_t(),
                max: self.last_t() - 1,
            });
        }
        let reward = self.reward_at(action, self.cursor)?;
        self.value *= 1.0 + reward.portfolio;
        self.cursor += 1;
        let state = self.state_at(self.cursor)?;
        let done = self.cursor == self.last_t();
        Ok((state, reward, done))
    }

    fn check_action(&self, action: &WeightVector) -> Result<()> {
        if action.regime() != self.regime {
            return Err(Error::InvalidWeights(format!(
                "action regime {:?} does not match environment regime {:?}",
                action.regime(),
                self.regime
            )));
        }
        if action.len() != self.num_assets() {
            return Err(Error::DimensionMismatch {
                context: "action width".into(),
                expected: self.num_assets(),
                actual: action.len(),
            });
        }
        Ok(())
    }
}
