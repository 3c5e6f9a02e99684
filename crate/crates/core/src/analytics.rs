//! Classical baseline allocators and the performance-metric suite.

use serde::{Deserialize, Serialize};

use crate::agent::WeightVector;
use crate::config::Regime;
use crate::error::{Error, Result};
use crate::market_data::ReturnTable;

/// Annualization constant for daily series.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Risk-adjusted performance summary of one daily return series.
/// `alpha_daily` and `beta` are `null` in JSON when the benchmark has
/// zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_daily_return: f64,
    pub volatility_daily: f64,
    pub volatility_annualized: f64,
    pub sharpe_annualized: f64,
    pub alpha_daily: Option<f64>,
    pub beta: Option<f64>,
    pub final_value: f64,
    pub num_days: usize,
}

// ---------------------------------------------------------------------------
// Baseline allocators
// ---------------------------------------------------------------------------

/// Unconstrained-sign minimum-variance weights from a daily covariance:
/// w = (Σ + ridge·I)⁻¹ 1 / (1ᵀ (Σ + ridge·I)⁻¹ 1). Weights sum to one and
/// may be negative.
pub fn min_variance_weights(returns: &ReturnTable, ridge: f64) -> Result<WeightVector> {
    let n = returns.num_assets();
    if returns.num_rows() < n + 2 {
        return Err(Error::InsufficientHistory {
            needed: n + 2,
            actual: returns.num_rows(),
        });
    }
    let cov = sample_covariance(returns);
    let weights = min_variance_from_cov(&cov, ridge)?;
    WeightVector::new(weights, Regime::Budget)
}

/// Closed-form minimum-variance solve against an explicit covariance.
pub fn min_variance_from_cov(cov: &[Vec<f64>], ridge: f64) -> Result<Vec<f64>> {
    let n = cov.len();
    if n == 0 || cov.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "covariance matrix must be square and non-empty".into(),
        ));
    }
    let mut system: Vec<Vec<f64>> = cov.to_vec();
    for (i, row) in system.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let solution = solve_linear(system, vec![1.0; n])?;
    let total: f64 = solution.iter().sum();
    if !total.is_finite() || total.abs() < 1e-300 {
        return Err(Error::SingularMatrix {
            column: n,
            pivot: total,
        });
    }
    Ok(solution.iter().map(|x| x / total).collect())
}

/// Sample covariance (divisor n-1) of daily returns.
pub fn sample_covariance(returns: &ReturnTable) -> Vec<Vec<f64>> {
    let n = returns.num_assets();
    let rows = returns.num_rows();
    let means = returns.column_means();
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..rows {
                acc += (returns.value(k, i) - means[i]) * (returns.value(k, j) - means[j]);
            }
            let value = acc / (rows - 1) as f64;
            cov[i][j] = value;
            cov[j][i] = value;
        }
    }
    cov
}

/// Gaussian elimination with partial pivoting. The singularity error
/// carries the failing pivot as a condition diagnostic.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col]))
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())
            .unwrap();
        if !pivot.is_finite() || pivot.abs() <= scale * 1e-14 {
            return Err(Error::SingularMatrix { column: col, pivot });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// All weight on the asset with the highest historical mean daily return;
/// ties break toward the lowest asset index.
pub fn max_return_weights(returns: &ReturnTable) -> Result<WeightVector> {
    if returns.num_rows() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            actual: returns.num_rows(),
        });
    }
    let means = returns.column_means();
    let mut best = 0;
    for (i, m) in means.iter().enumerate() {
        if *m > means[best] {
            best = i;
        }
    }
    let mut weights = vec![0.0; returns.num_assets()];
    weights[best] = 1.0;
    WeightVector::new(weights, Regime::LongOnly)
}

/// The 1/n portfolio.
pub fn equal_weights(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one asset".into()));
    }
    WeightVector::new(vec![1.0 / n as f64; n], Regime::LongOnly)
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Compound `initial` through a daily return series.
pub fn equity_curve(returns: &[f64], initial: f64) -> Result<Vec<f64>> {
    let mut curve = Vec::with_capacity(returns.len() + 1);
    curve.push(initial);
    let mut value = initial;
    for r in returns {
        if r.is_nan() || *r <= -1.0 {
            return Err(Error::InvalidReturn(*r));
        }
        value *= 1.0 + r;
        curve.push(value);
    }
    Ok(curve)
}

/// Mean/volatility/Sharpe plus alpha and beta against the benchmark.
/// Volatility is the sample standard deviation (divisor n-1); annualized
/// quantities use exactly 252 periods per year. A zero-variance benchmark
/// leaves alpha and beta undefined while the rest is still computed.
pub fn compute_metrics(
    portfolio_returns: &[f64],
    benchmark_returns: &[f64],
    risk_free_rate: f64,
    initial_investment: f64,
) -> Result<MetricsReport> {
    let n = portfolio_returns.len();
    if n < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            actual: n,
        });
    }
    if benchmark_returns.len() != n {
        return Err(Error::DimensionMismatch {
            context: "benchmark series length".into(),
            expected: n,
            actual: benchmark_returns.len(),
        });
    }

    let nf = n as f64;
    let mean_p = portfolio_returns.iter().sum::<f64>() / nf;
    let mean_b = benchmark_returns.iter().sum::<f64>() / nf;

    let mut var_p = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for (rp, rb) in portfolio_returns.iter().zip(benchmark_returns) {
        let dp = rp - mean_p;
        let db = rb - mean_b;
        var_p += dp * dp;
        var_b += db * db;
        cov += dp * db;
    }
    var_p /= nf - 1.0;
    var_b /= nf - 1.0;
    cov /= nf - 1.0;

    let vol = var_p.sqrt();
    let rf_daily = risk_free_rate / TRADING_DAYS_PER_YEAR;
    let sharpe = if vol == 0.0 {
        0.0
    } else {
        (mean_p - rf_daily) / vol * TRADING_DAYS_PER_YEAR.sqrt()
    };

    let (alpha, beta) = if var_b == 0.0 {
        (None, None)
    } else {
        let beta = cov / var_b;
        let alpha = mean_p - rf_daily - beta * (mean_b - rf_daily);
        (Some(alpha), Some(beta))
    };

    let final_value = *equity_curve(portfolio_returns, initial_investment)?
        .last()
        .unwrap();

    Ok(MetricsReport {
        mean_daily_return: mean_p,
        volatility_daily: vol,
        volatility_annualized: vol * TRADING_DAYS_PER_YEAR.sqrt(),
        sharpe_annualized: sharpe,
        alpha_daily: alpha,
        beta,
        final_value,
        num_days: n,
    })
}

/// Portfolio variance wᵀΣw under an explicit covariance.
pub fn portfolio_variance(weights: &[f64], cov: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            acc += wi * wj * cov[i][j];
        }
    }
    acc
}
