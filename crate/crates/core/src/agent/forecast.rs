//! Forecasting algorithm: 27 states x 27 actions.

use serde::{Deserialize, Serialize};

use super::AgentParams;

pub const F_STATES: usize = 27;
pub const F_ACTIONS: usize = 27;
/// Smallest price a forecast may take.
pub const PRICE_TICK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastState {
    /// long-term volatility band
    pub s0: u8,
    /// short-term volatility band
    pub s1: u8,
    /// price/fundamental gap band
    pub s2: u8,
}

impl ForecastState {
    pub fn index(self) -> usize {
        9 * self.s0 as usize + 3 * self.s1 as usize + self.s2 as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < F_STATES);
        Self { s0: (i / 9) as u8, s1: (i / 3 % 3) as u8, s2: (i % 3) as u8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastAction {
    /// 0 mean-reversion, 1 average, 2 trend-following
    pub a0: u8,
    /// look-back scale: `T = (1 + a1) tau / 2`
    pub a1: u8,
    /// weight of the technical forecast against the fundamental view
    pub a2: u8,
}

impl ForecastAction {
    pub fn index(self) -> usize {
        9 * self.a0 as usize + 3 * self.a1 as usize + self.a2 as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < F_ACTIONS);
        Self { a0: (i / 9) as u8, a1: (i / 3 % 3) as u8, a2: (i % 3) as u8 }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..F_ACTIONS).map(Self::from_index)
    }
}

/// `lo`/`hi` are inclusive step indices, clamped to `[0, prices.len() - 1]`.
pub fn window_mean(prices: &[f64], lo: isize, hi: isize) -> f64 {
    let last = prices.len() as isize - 1;
    let hi = hi.clamp(0, last) as usize;
    let lo = (lo.clamp(0, last) as usize).min(hi);
    let w = &prices[lo..=hi];
    w.iter().sum::<f64>() / w.len() as f64
}

/// Population variance of `prices[t - len ..= t]`, clamped to available history.
pub fn trailing_variance(prices: &[f64], t: usize, len: usize) -> f64 {
    let w = &prices[t.saturating_sub(len)..=t];
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    w.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n
}

/// Mean of `|P - B| / P` over `[t - len, t]`.
pub fn mean_gap(prices: &[f64], view: &[f64], t: usize, len: usize) -> f64 {
    let lo = t.saturating_sub(len);
    let n = (t - lo + 1) as f64;
    (lo..=t).map(|u| (prices[u] - view[u]).abs() / prices[u]).sum::<f64>() / n
}

pub fn long_window(params: &AgentParams) -> usize {
    3 * params.horizon
}

pub fn short_window(params: &AgentParams) -> usize {
    params.horizon.div_ceil(2).max(1)
}

fn quartile_band(p: f64) -> u8 {
    if p < 0.25 {
        0
    } else if p > 0.75 {
        2
    } else {
        1
    }
}

fn gap_band(gap: f64) -> u8 {
    if gap < 0.10 {
        0
    } else if gap > 0.30 {
        2
    } else {
        1
    }
}

/// Maps the two volatility percentiles and the mean price/view gap to a state.
pub fn forecast_state(long_var_percentile: f64, short_var_percentile: f64, mean_gap: f64) -> ForecastState {
    ForecastState {
        s0: quartile_band(long_var_percentile),
        s1: quartile_band(short_var_percentile),
        s2: gap_band(mean_gap),
    }
}

/// Weight of the technical forecast.
pub fn alpha(reflexivity: f64, a2: u8) -> f64 {
    let rho = reflexivity;
    let a = if rho <= 0.5 {
        [0.0, rho, 2.0 * rho]
    } else {
        [2.0 * rho - 1.0, rho, 1.0]
    };
    a[a2 as usize]
}

/// Look-back length selected by `a1`.
pub fn lookback(horizon: usize, a1: u8) -> usize {
    ((1 + a1 as usize) * horizon / 2).max(1)
}

/// Technical forecast for `a0`, from window means over `[t-2T, t-T]` and `[t-T, t]`.
pub fn technical_forecast(prices: &[f64], t: usize, a0: u8, lookback: usize) -> f64 {
    let (t_i, l) = (t as isize, lookback as isize);
    let far = window_mean(prices, t_i - 2 * l, t_i - l);
    let near = window_mean(prices, t_i - l, t_i);
    let p = prices[t];
    match a0 {
        0 => p + far - near,
        1 => 0.5 * (far + near),
        _ => p - far + near,
    }
}

/// The agent's price projection `H = alpha * P_hat + (1 - alpha) * B`,
/// floored at [`PRICE_TICK`].
pub fn forecast(prices: &[f64], view_now: f64, action: ForecastAction, params: &AgentParams, t: usize) -> f64 {
    let technical = technical_forecast(prices, t, action.a0, lookback(params.horizon, action.a1));
    let a = alpha(params.reflexivity, action.a2);
    let h = a * technical + (1.0 - a) * view_now;
    if h.is_finite() {
        h.max(PRICE_TICK)
    } else {
        PRICE_TICK
    }
}

/// Reward for a forecast-error percentile: small errors earn the most.
pub fn reward_from_percentile(p: f64) -> i32 {
    if p < 0.05 {
        4
    } else if p < 0.25 {
        2
    } else if p < 0.50 {
        1
    } else if p < 0.75 {
        -1
    } else if p < 0.95 {
        -2
    } else {
        -4
    }
}

/// Index of the action whose forecast at `t` lands closest to `realized`.
/// Ties go to the lowest index.
pub fn best_forecast_action(
    prices: &[f64],
    view_at_t: f64,
    params: &AgentParams,
    t: usize,
    realized: f64,
) -> ForecastAction {
    let mut best = ForecastAction::from_index(0);
    let mut best_err = f64::INFINITY;
    for action in ForecastAction::all() {
        let err = (forecast(prices, view_at_t, action, params, t) - realized).abs();
        if err < best_err {
            best_err = err;
            best = action;
        }
    }
    best
}
