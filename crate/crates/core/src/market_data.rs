//! Price-series loading, filtering, and feature preprocessing.
//!
//! The input snapshot is a CSV with a `date` column (ISO-8601) followed by
//! one adjusted-close column per asset. Cells that are empty or fail to
//! parse become NaN and the whole row is dropped by [`drop_incomplete_rows`]
//! before anything downstream touches it; nothing is ever imputed.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;

use crate::config::DateRange;
use crate::error::{Error, Result};

/// Date-aligned matrix of adjusted close prices: one row per date,
/// one column per asset. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    prices: Vec<Vec<f64>>,
}

impl PriceTable {
    /// Build a table, enforcing shape and strictly increasing dates.
    /// Cells may be NaN at this stage (missing observations).
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if prices.len() != dates.len() {
            return Err(Error::DimensionMismatch {
                context: "price rows vs dates".into(),
                expected: dates.len(),
                actual: prices.len(),
            });
        }
        for (t, row) in prices.iter().enumerate() {
            if row.len() != assets.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("price row {t} vs assets"),
                    expected: assets.len(),
                    actual: row.len(),
                });
            }
        }
        for t in 1..dates.len() {
            if dates[t] <= dates[t - 1] {
                return Err(Error::Csv {
                    row: t,
                    message: format!("dates not strictly increasing at {}", dates[t]),
                });
            }
        }
        Ok(Self {
            dates,
            assets,
            prices,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.dates[t]
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == id)
    }

    pub fn price(&self, t: usize, asset: usize) -> f64 {
        self.prices[t][asset]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.prices[t]
    }

    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.prices.iter().map(|row| row[asset]).collect()
    }

    /// True when every cell is finite and strictly positive.
    pub fn is_complete(&self) -> bool {
        self.prices
            .iter()
            .all(|row| row.iter().all(|p| p.is_finite() && *p > 0.0))
    }

    /// First row (if any) violating completeness, as (row, asset index).
    pub fn first_incomplete_cell(&self) -> Option<(usize, usize)> {
        for (t, row) in self.prices.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                if !(p.is_finite() && *p > 0.0) {
                    return Some((t, i));
                }
            }
        }
        None
    }

    /// Copy of the rows in `range`, preserving order.
    pub fn slice_rows(&self, range: Range<usize>) -> PriceTable {
        PriceTable {
            dates: self.dates[range.clone()].to_vec(),
            assets: self.assets.clone(),
            prices: self.prices[range].to_vec(),
        }
    }

    /// Contiguous row range whose dates fall inside `range` (inclusive).
    pub fn rows_in_range(&self, range: &DateRange) -> Range<usize> {
        let start = self.dates.partition_point(|d| *d < range.start);
        let end = self.dates.partition_point(|d| *d <= range.end);
        start..end
    }
}

/// Daily simple returns derived from a complete [`PriceTable`].
/// Row `k` is the return realized on `dates[k]` (the later day).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    returns: Vec<Vec<f64>>,
}

impl ReturnTable {
    pub fn num_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn value(&self, k: usize, asset: usize) -> f64 {
        self.returns[k][asset]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.returns[k]
    }

    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.returns.iter().map(|row| row[asset]).collect()
    }

    /// Mean daily return per asset.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.num_rows() as f64;
        (0..self.num_assets())
            .map(|i| self.returns.iter().map(|row| row[i]).sum::<f64>() / n)
            .collect()
    }

    pub fn slice_rows(&self, range: Range<usize>) -> ReturnTable {
        ReturnTable {
            dates: self.dates[range.clone()].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns[range].to_vec(),
        }
    }
}

/// Load a CSV snapshot (`date,<asset1>,<asset2>,...`), sorted by date,
/// optionally restricted to `asset_filter` (in filter order).
///
/// Empty or non-numeric price cells parse as NaN and are left for
/// [`drop_incomplete_rows`]; duplicate dates are rejected with the
/// offending row index.
pub fn load_price_table(path: &Path, asset_filter: Option<&[String]>) -> Result<PriceTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Csv {
            row: 0,
            message: "need a date column plus at least one asset column".into(),
        });
    }
    if !headers[0].trim().eq_ignore_ascii_case("date") {
        return Err(Error::Csv {
            row: 0,
            message: format!("first column must be `date`, got `{}`", &headers[0]),
        });
    }
    let all_assets: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();

    // Column selection: identity, or the filter's order.
    let selected: Vec<usize> = match asset_filter {
        None => (0..all_assets.len()).collect(),
        Some(filter) => filter
            .iter()
            .map(|id| {
                all_assets
                    .iter()
                    .position(|a| a == id)
                    .ok_or_else(|| Error::UnknownAsset(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let assets: Vec<String> = selected.iter().map(|&i| all_assets[i].clone()).collect();

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1; // 1-based data row, matching file line numbering after the header
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                row,
                message: format!("expected {} columns, got {}", headers.len(), record.len()),
            });
        }
        let date = record[0].trim().parse::<NaiveDate>().map_err(|_| Error::Csv {
            row,
            message: format!("unparseable date `{}`", &record[0]),
        })?;
        let prices: Vec<f64> = selected
            .iter()
            .map(|&i| {
                let cell = record[i + 1].trim();
                if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().unwrap_or(f64::NAN)
                }
            })
            .collect();
        rows.push((date, prices));
    }

    rows.sort_by_key(|(date, _)| *date);
    for t in 1..rows.len() {
        if rows[t].0 == rows[t - 1].0 {
            return Err(Error::Csv {
                row: t + 1,
                message: format!("duplicate date {}", rows[t].0),
            });
        }
    }

    let (dates, prices): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    PriceTable::new(dates, assets, prices)
}

/// Write a table back out in the same CSV layout `load_price_table` reads.
pub fn write_price_table<W: Write>(table: &PriceTable, writer: &mut W) -> Result<()> {
    let to_io = |source: std::io::Error| Error::Io {
        path: "<writer>".into(),
        source,
    };
    write!(writer, "date").map_err(to_io)?;
    for asset in table.assets() {
        write!(writer, ",{asset}").map_err(to_io)?;
    }
    writeln!(writer).map_err(to_io)?;
    for t in 0..table.num_rows() {
        write!(writer, "{}", table.date(t)).map_err(to_io)?;
        for i in 0..table.num_assets() {
            write!(writer, ",{}", table.price(t, i)).map_err(to_io)?;
        }
        writeln!(writer).map_err(to_io)?;
    }
    Ok(())
}

/// Drop every row containing a non-finite or non-positive cell,
/// preserving order. Errors when fewer than `min_rows` rows survive.
pub fn drop_incomplete_rows(table: &PriceTable, min_rows: usize) -> Result<PriceTable> {
    let mut dates = Vec::with_capacity(table.num_rows());
    let mut prices = Vec::with_capacity(table.num_rows());
    for t in 0..table.num_rows() {
        let row = table.row(t);
        if row.iter().all(|p| p.is_finite() && *p > 0.0) {
            dates.push(table.date(t));
            prices.push(row.to_vec());
        }
    }
    if dates.len() < min_rows {
        return Err(Error::InsufficientHistory {
            needed: min_rows,
            actual: dates.len(),
        });
    }
    PriceTable::new(dates, table.assets().to_vec(), prices)
}

/// Remove the ordinary-least-squares line fit over the series' own index.
/// The residuals have zero mean and zero linear trend up to rounding.
pub fn detrend_linear(series: &[f64]) -> Result<Vec<f64>> {
    let (intercept, slope) = fit_line(series, 0..series.len())?;
    Ok(series
        .iter()
        .enumerate()
        .map(|(t, y)| y - (intercept + slope * t as f64))
        .collect())
}

/// OLS line `y = a + b*t` over the index positions in `fit`, where `t`
/// is the position within the full `series`. Returns `(a, b)`.
fn fit_line(series: &[f64], fit: Range<usize>) -> Result<(f64, f64)> {
    let n = fit.len();
    if n < 2 || fit.end > series.len() {
        return Err(Error::InsufficientHistory {
            needed: 2,
            actual: n.min(series.len()),
        });
    }
    let nf = n as f64;
    let mean_t = fit.clone().map(|t| t as f64).sum::<f64>() / nf;
    let mean_y = fit.clone().map(|t| series[t]).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for t in fit {
        let dt = t as f64 - mean_t;
        sxx += dt * dt;
        sxy += dt * (series[t] - mean_y);
    }
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = mean_y - slope * mean_t;
    Ok((intercept, slope))
}

/// Feature preprocessing for state construction: per asset, subtract the
/// OLS line fitted on `fit_rows` (the training range), extrapolated across
/// every row. With `detrend` false the raw table is passed through.
/// Rewards never use this table; they always come from raw prices.
#[allow(clippy::needless_range_loop)]
pub fn build_feature_table(
    table: &PriceTable,
    fit_rows: Range<usize>,
    detrend: bool,
) -> Result<PriceTable> {
    if !detrend {
        return Ok(table.clone());
    }
    if let Some((row, asset)) = table.first_incomplete_cell() {
        return Err(Error::IncompleteData {
            row,
            asset: table.assets()[asset].clone(),
        });
    }
    let mut features = vec![vec![0.0; table.num_assets()]; table.num_rows()];
    for i in 0..table.num_assets() {
        let series = table.column(i);
        let (intercept, slope) = fit_line(&series, fit_rows.clone())?;
        for (t, value) in series.iter().enumerate() {
            features[t][i] = value - (intercept + slope * t as f64);
        }
    }
    PriceTable::new(table.dates().to_vec(), table.assets().to_vec(), features)
}

/// Daily simple returns: `r[t][i] = p[t+1][i] / p[t][i] - 1`.
pub fn simple_returns(table: &PriceTable) -> Result<ReturnTable> {
    if table.num_rows() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            actual: table.num_rows(),
        });
    }
    if let Some((row, asset)) = table.first_incomplete_cell() {
        return Err(Error::IncompleteData {
            row,
            asset: table.assets()[asset].clone(),
        });
    }
    let mut returns = Vec::with_capacity(table.num_rows() - 1);
    for t in 0..table.num_rows() - 1 {
        returns.push(
            (0..table.num_assets())
                .map(|i| table.price(t + 1, i) / table.price(t, i) - 1.0)
                .collect(),
        );
    }
    Ok(ReturnTable {
        dates: table.dates()[1..].to_vec(),
        assets: table.assets().to_vec(),
        returns,
    })
}

/// Arithmetic mean of the trailing window `series[t-window+1 ..= t]`.
pub fn moving_average(series: &[f64], window: usize, t: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    if t >= series.len() {
        return Err(Error::OutOfRange {
            index: t,
            min: window - 1,
            max: series.len().saturating_sub(1),
        });
    }
    if t + 1 < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            actual: t + 1,
        });
    }
    Ok(series[t + 1 - window..=t].iter().sum::<f64>() / window as f64)
}

/// Pearson correlation matrix of the assets over the trailing window
/// ending at row `t`. Symmetric with unit diagonal, entries clamped to
/// [-1, 1]; a pair involving a zero-variance window gets 0 off-diagonal.
pub fn rolling_correlation(table: &PriceTable, t: usize, window: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    if t >= table.num_rows() {
        return Err(Error::OutOfRange {
            index: t,
            min: window - 1,
            max: table.num_rows().saturating_sub(1),
        });
    }
    if t + 1 < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            actual: t + 1,
        });
    }

    let n = table.num_assets();
    let rows = t + 1 - window..=t;
    let windows: Vec<Vec<f64>> = (0..n)
        .map(|i| rows.clone().map(|r| table.price(r, i)).collect())
        .collect();
    let means: Vec<f64> = windows
        .iter()
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    let sq_devs: Vec<f64> = windows
        .iter()
        .zip(&means)
        .map(|(w, m)| w.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        .collect();

    let mut corr = vec![vec![0.0; n]; n];
    for i in 0..n {
        corr[i][i] = 1.0;
        for j in i + 1..n {
            let value = if sq_devs[i] == 0.0 || sq_devs[j] == 0.0 {
                0.0
            } else {
                let cov: f64 = windows[i]
                    .iter()
                    .zip(&windows[j])
                    .map(|(x, y)| (x - means[i]) * (y - means[j]))
                    .sum();
                (cov / (sq_devs[i].sqrt() * sq_devs[j].sqrt())).clamp(-1.0, 1.0)
            };
            corr[i][j] = value;
            corr[j][i] = value;
        }
    }
    Ok(corr)
}
