//! Seeded synthetic market generator: correlated geometric random walks.
//!
//! Per-asset log-price increments are `drift - vol^2/2 + vol * z` with
//! standard-normal shocks sharing one pairwise correlation, so the
//! expected gross daily return of asset `i` is exactly `exp(drift[i])`.
//! Dates advance over weekdays only.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qfolio_core::error::{Error, Result};
use qfolio_core::market_data::PriceTable;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub assets: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    /// Per-asset daily log drift.
    pub drift: Vec<f64>,
    /// Per-asset daily volatility of log returns.
    pub vol: Vec<f64>,
    /// Common pairwise shock correlation in [0, 1].
    pub correlation: f64,
    pub initial_price: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.assets == 0 {
            return fail("need at least one asset".into());
        }
        if self.days < 2 {
            return fail("need at least two days".into());
        }
        if self.drift.len() != self.assets || self.vol.len() != self.assets {
            return fail(format!(
                "drift/vol must have one entry per asset ({}), got {}/{}",
                self.assets,
                self.drift.len(),
                self.vol.len()
            ));
        }
        if self.vol.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return fail("vol entries must be non-negative reals".into());
        }
        if self.drift.iter().any(|d| !d.is_finite()) {
            return fail("drift entries must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return fail(format!(
                "correlation must be in [0, 1], got {}",
                self.correlation
            ));
        }
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return fail("initial_price must be positive".into());
        }
        Ok(())
    }
}

/// Broadcast a per-asset parameter list: a single value applies to every
/// asset, otherwise one entry per asset is required.
pub fn broadcast(values: &[f64], assets: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; assets]),
        n if n == assets => Ok(values.to_vec()),
        n => Err(Error::InvalidArgument(format!(
            "expected 1 or {assets} values, got {n}"
        ))),
    }
}

fn next_weekday(mut date: NaiveDate) -> NaiveDate {
    loop {
        date = date + Days::new(1);
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return date;
        }
    }
}

/// Generate the price table for `spec`, deterministically from its seed.
pub fn generate(spec: &SynthSpec) -> Result<PriceTable> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.assets;

    let mut date = spec.start_date;
    if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date = next_weekday(date);
    }

    let common_scale = spec.correlation.sqrt();
    let idio_scale = (1.0 - spec.correlation).sqrt();

    let mut dates = Vec::with_capacity(spec.days);
    let mut prices = Vec::with_capacity(spec.days);
    let mut log_prices = vec![spec.initial_price.ln(); n];

    for day in 0..spec.days {
        if day > 0 {
            let common: f64 = rng.sample(StandardNormal);
            for (i, lp) in log_prices.iter_mut().enumerate() {
                let idio: f64 = rng.sample(StandardNormal);
                let shock = common_scale * common + idio_scale * idio;
                *lp += spec.drift[i] - spec.vol[i] * spec.vol[i] / 2.0 + spec.vol[i] * shock;
            }
            date = next_weekday(date);
        }
        dates.push(date);
        prices.push(log_prices.iter().map(|lp| lp.exp()).collect());
    }

    let assets = (0..n).map(|i| format!("A{i}")).collect();
    PriceTable::new(dates, assets, prices)
}
