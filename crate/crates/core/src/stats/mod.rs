//! Return, volatility and correlation statistics of price/volume series.

mod histogram;
mod report;

pub use histogram::{histogram_distance, shared_edges, Histogram, HISTOGRAM_BINS, HISTOGRAM_SPAN_STD};
pub use report::{
    build_report, compare_reports, pool_reports, Calendar, Comparison, FamilyDistance, LagSeries, ShiftedCorrelation,
    StylizedStatsReport, FAMILY_COUNT,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Pearson correlation of two equal-length samples; 0 when either side has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::arg("prices", format!("need at least 2 prices, got {}", prices.len())));
    }
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
        return Err(Error::NonPositivePrice { index, value });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// `std(P[t-lag..=t]) / P(t)` for every `t >= lag`.
pub fn windowed_volatility(prices: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag < 2 {
        return Err(Error::arg("lag", format!("must be >= 2, got {lag}")));
    }
    if prices.len() <= lag {
        return Err(Error::WindowTooLarge { window: lag, len: prices.len() });
    }
    Ok((lag..prices.len()).map(|t| std_dev(&prices[t - lag..=t]) / prices[t]).collect())
}

/// Correlation of `x[t-lag..=t]` with `x[t-2lag..=t-lag]` for every `t >= 2 lag`.
pub fn adjacent_window_correlation(x: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag < 2 {
        return Err(Error::arg("lag", format!("must be >= 2, got {lag}")));
    }
    if x.len() <= 2 * lag {
        return Err(Error::WindowTooLarge { window: 2 * lag, len: x.len() });
    }
    Ok((2 * lag..x.len()).map(|t| pearson(&x[t - lag..=t], &x[t - 2 * lag..=t - lag])).collect())
}

/// Mean over `t` of the correlation between `x[t-window..=t]` and the same
/// window moved back by `shift`.
pub fn shifted_window_mean_correlation(x: &[f64], window: usize, shift: usize) -> Result<f64> {
    if window < 2 {
        return Err(Error::arg("window", format!("must be >= 2, got {window}")));
    }
    if shift < 1 {
        return Err(Error::arg("shift", "must be >= 1"));
    }
    if x.len() <= window + shift {
        return Err(Error::WindowTooLarge { window: window + shift, len: x.len() });
    }
    let first = window + shift;
    let sum: f64 = (first..x.len()).map(|t| pearson(&x[t - window..=t], &x[t - window - shift..=t - shift])).sum();
    Ok(sum / (x.len() - first) as f64)
}

/// Sample autocorrelation at `lag` (biased estimator); 0 for a constant series.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 0.0 {
        return 0.0;
    }
    let num: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    num / denom
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// zero variance; skewness and kurtosis are reported as 0
    pub degenerate: bool,
}

pub fn moments(x: &[f64]) -> Result<Moments> {
    if x.len() < 4 {
        return Err(Error::arg("returns", format!("need at least 4 values, got {}", x.len())));
    }
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= (1e-12 * m.abs()).powi(2) {
        return Ok(Moments { mean: m, std: m2.sqrt(), skewness: 0.0, excess_kurtosis: 0.0, degenerate: true });
    }
    Ok(Moments {
        mean: m,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        degenerate: false,
    })
}

/// Hill estimate of the tail exponent from the `k` largest absolute values.
pub fn tail_index(x: &[f64], k: usize) -> Result<f64> {
    if k < 10 || 2 * k >= x.len() {
        return Err(Error::InsufficientTail { k, len: x.len() });
    }
    let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let threshold = abs[k];
    if threshold <= 0.0 {
        return Err(Error::InsufficientTail { k, len: x.len() });
    }
    let s: f64 = abs[..k].iter().map(|v| (v / threshold).ln()).sum();
    if s <= 0.0 {
        return Err(Error::InsufficientTail { k, len: x.len() });
    }
    Ok(k as f64 / s)
}

/// Default Hill tail size: 5% of the sample, when that is a valid choice.
pub fn default_tail_size(len: usize) -> Option<usize> {
    let k = len / 20;
    (k >= 10 && 2 * k < len).then_some(k)
}
