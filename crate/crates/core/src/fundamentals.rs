//! Fundamental-value jump process and agents' cointegrated views of it.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A per-step relative move of at least this size counts as a jump when
/// computing amplitude statistics.
pub const JUMP_DETECTION_THRESHOLD: f64 = 0.01;
/// Moves larger than this (relative to the previous value) are "large jumps".
pub const LARGE_JUMP: f64 = 0.20;
/// Scale constant of the view noise, `sigma_B(nu) = VIEW_NOISE_SCALE * 2^(-nu/4)`.
/// Chosen so that nu = 10 gives a mean absolute disparity of about 4.69%.
pub const VIEW_NOISE_SCALE: f64 = 0.3325;
/// AR(1) persistence of the view noise.
pub const VIEW_NOISE_PERSISTENCE: f64 = 0.97;
/// Views never deviate by more than this many noise scales.
pub const VIEW_DEVIATION_CAP: f64 = 5.0;

/// Parameters of the multiplicative jump process.
///
/// Each step the log-value moves by `d + s * M`, with `d ~ N(0, drift_std)`,
/// `M = exp(N(log_amplitude_mean, log_amplitude_std))` arriving with
/// probability `jump_probability` and `s = +-1` equiprobable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpParams {
    pub jump_probability: f64,
    pub log_amplitude_mean: f64,
    pub log_amplitude_std: f64,
    pub drift_std: f64,
}

impl Default for JumpParams {
    fn default() -> Self {
        Self {
            jump_probability: 0.16,
            log_amplitude_mean: 0.022f64.ln(),
            log_amplitude_std: 1.1,
            drift_std: 0.002,
        }
    }
}

impl JumpParams {
    /// No jumps and no drift: the series stays at its initial value.
    pub fn flat() -> Self {
        Self { jump_probability: 0.0, log_amplitude_mean: 0.0, log_amplitude_std: 0.0, drift_std: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return Err(Error::arg("jump_probability", "must lie in [0, 1]"));
        }
        if !(self.log_amplitude_std >= 0.0 && self.drift_std >= 0.0) || !self.log_amplitude_mean.is_finite() {
            return Err(Error::arg("jump params", "standard deviations must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSeries {
    pub asset_id: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CointegratedView {
    pub agent_id: usize,
    pub asset_id: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpStats {
    pub annual_jump_rate: f64,
    pub mean_jump_amplitude_pct: f64,
    pub std_jump_amplitude_pct: f64,
    pub mean_disparity_pct: f64,
    pub std_disparity_pct: f64,
}

/// Generates the fundamental value path for one asset. Deterministic in `seed`.
pub fn generate_fundamental(
    asset_id: usize,
    initial: f64,
    horizon: usize,
    params: &JumpParams,
    seed: u64,
) -> Result<FundamentalSeries> {
    if horizon < 2 {
        return Err(Error::arg("horizon", format!("must be >= 2, got {horizon}")));
    }
    if !(initial > 0.0 && initial.is_finite()) {
        return Err(Error::arg("initial", format!("must be positive, got {initial}")));
    }
    params.validate()?;

    let mut rng = rng::stream(seed, 0);
    let mut values = Vec::with_capacity(horizon);
    values.push(initial);
    let mut value = initial;
    for _ in 1..horizon {
        let z_drift: f64 = rng.sample(StandardNormal);
        let u_arrival: f64 = rng.random();
        let z_amp: f64 = rng.sample(StandardNormal);
        let up: bool = rng.random();

        let mut step = params.drift_std * z_drift;
        if u_arrival < params.jump_probability {
            let magnitude = (params.log_amplitude_mean + params.log_amplitude_std * z_amp).exp();
            step += if up { magnitude } else { -magnitude };
        }
        value = (value * step.exp()).max(f64::MIN_POSITIVE);
        values.push(value);
    }
    Ok(FundamentalSeries { asset_id, values })
}

/// Stationary standard deviation of the view noise for accuracy `nu`.
pub fn view_noise_std(accuracy: u32) -> f64 {
    VIEW_NOISE_SCALE * 2f64.powf(-(accuracy as f64) / 4.0)
}

/// An agent's biased estimate `B(t) = T(t) * (1 + eps_t)` of the fundamental,
/// with `eps` a stationary AR(1) process whose scale shrinks as `accuracy`
/// grows.
pub fn cointegrate(
    series: &FundamentalSeries,
    accuracy: u32,
    agent_id: usize,
    agent_seed: u64,
) -> Result<CointegratedView> {
    if !(1..=64).contains(&accuracy) {
        return Err(Error::arg("accuracy", format!("must lie in [1, 64], got {accuracy}")));
    }
    Ok(cointegrate_with_std(series, view_noise_std(accuracy), agent_id, agent_seed))
}

pub fn cointegrate_with_std(
    series: &FundamentalSeries,
    noise_std: f64,
    agent_id: usize,
    agent_seed: u64,
) -> CointegratedView {
    let mut rng = rng::stream(agent_seed, 1 + series.asset_id as u64);
    let phi = VIEW_NOISE_PERSISTENCE;
    let innovation = noise_std * (1.0 - phi * phi).sqrt();
    let cap = VIEW_DEVIATION_CAP * noise_std;
    let lo = (-cap).max(-0.9);

    let mut eps = noise_std * rng.sample::<f64, _>(StandardNormal);
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            if t > 0 {
                eps = phi * eps + innovation * rng.sample::<f64, _>(StandardNormal);
            }
            v * (1.0 + eps.clamp(lo, cap))
        })
        .collect();
    CointegratedView { agent_id, asset_id: series.asset_id, values }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Jump and disparity statistics, in percent where named so.
///
/// * large jumps: steps with `|T(t) - T(t-1)| / T(t-1) > 20%`, scaled to a
///   365-step year;
/// * amplitude: `|T(t) - T(t-1)| / T(t)` over steps where it exceeds
///   [`JUMP_DETECTION_THRESHOLD`];
/// * disparity: `|T(t) - B(t)| / T(t)` over all views and steps.
pub fn fundamental_stats(series: &FundamentalSeries, views: &[CointegratedView]) -> JumpStats {
    let v = &series.values;
    let horizon = v.len().max(1) as f64;
    let mut large = 0usize;
    let mut amplitudes = Vec::new();
    for w in v.windows(2) {
        let delta = w[1] - w[0];
        if delta.abs() / w[0] > LARGE_JUMP {
            large += 1;
        }
        let amp = delta.abs() / w[1];
        if amp > JUMP_DETECTION_THRESHOLD {
            amplitudes.push(100.0 * amp);
        }
    }
    let disparities: Vec<f64> = views
        .iter()
        .filter(|view| view.asset_id == series.asset_id)
        .flat_map(|view| {
            v.iter().zip(&view.values).map(|(t, b)| 100.0 * (t - b).abs() / t)
        })
        .collect();
    let (mean_amp, std_amp) = mean_std(&amplitudes);
    let (mean_disp, std_disp) = mean_std(&disparities);
    JumpStats {
        annual_jump_rate: large as f64 * 365.0 / horizon,
        mean_jump_amplitude_pct: mean_amp,
        std_jump_amplitude_pct: std_amp,
        mean_disparity_pct: mean_disp,
        std_disparity_pct: std_disp,
    }
}

/// Averages per-run statistics field by field.
pub fn mean_stats(stats: &[JumpStats]) -> JumpStats {
    let n = stats.len().max(1) as f64;
    let sum = |f: fn(&JumpStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
    JumpStats {
        annual_jump_rate: sum(|s| s.annual_jump_rate),
        mean_jump_amplitude_pct: sum(|s| s.mean_jump_amplitude_pct),
        std_jump_amplitude_pct: sum(|s| s.std_jump_amplitude_pct),
        mean_disparity_pct: sum(|s| s.mean_disparity_pct),
        std_disparity_pct: sum(|s| s.std_disparity_pct),
    }
}

/// Runs `seeds` independent draws of one fundamental series plus
/// `views_per_series` agent views each and returns the per-seed statistics.
pub fn ensemble_stats(
    horizon: usize,
    params: &JumpParams,
    accuracy: u32,
    views_per_series: usize,
    seeds: u64,
    master_seed: u64,
) -> Result<Vec<JumpStats>> {
    crate::par::try_map_range(seeds as usize, crate::par::Execution::default(), |s| {
        let seed = rng::derive_seed(master_seed, s as u64);
        let series = generate_fundamental(0, 100.0, horizon, params, seed)?;
        let views = (0..views_per_series)
            .map(|i| cointegrate(&series, accuracy, i, rng::derive_seed(seed, 1 + i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(fundamental_stats(&series, &views))
    })
}

/// Writes `t,value` rows.
pub fn write_series_csv(path: &Path, values: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "t,value").map_err(io)?;
    for (t, v) in values.iter().enumerate() {
        writeln!(out, "{t},{v}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_params_give_constant_series() {
        let s = generate_fundamental(0, 100.0, 50, &JumpParams::flat(), 3).unwrap();
        assert!(s.values.iter().all(|&v| v == 100.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_fundamental(0, 100.0, 1, &JumpParams::default(), 0).is_err());
        assert!(generate_fundamental(0, 0.0, 10, &JumpParams::default(), 0).is_err());
        assert!(generate_fundamental(0, -1.0, 10, &JumpParams::default(), 0).is_err());
        let s = generate_fundamental(0, 100.0, 10, &JumpParams::default(), 0).unwrap();
        assert!(cointegrate(&s, 0, 0, 0).is_err());
        assert!(cointegrate(&s, 65, 0, 0).is_err());
        assert!(cointegrate(&s, 64, 0, 0).is_ok());
    }

    #[test]
    fn seed_determinism() {
        let p = JumpParams::default();
        let a = generate_fundamental(0, 100.0, 500, &p, 11).unwrap();
        let b = generate_fundamental(0, 100.0, 500, &p, 11).unwrap();
        let c = generate_fundamental(0, 100.0, 500, &p, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_noise_view_is_identity() {
        let s = generate_fundamental(0, 100.0, 200, &JumpParams::default(), 5).unwrap();
        let view = cointegrate_with_std(&s, 0.0, 0, 9);
        assert_eq!(view.values, s.values);
    }

    #[test]
    fn distinct_agents_get_distinct_views() {
        let s = generate_fundamental(0, 100.0, 200, &JumpParams::default(), 5).unwrap();
        let a = cointegrate(&s, 10, 0, 1).unwrap();
        let b = cointegrate(&s, 10, 1, 2).unwrap();
        let max_diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(max_diff > 0.0);
    }

    #[test]
    fn view_deviation_is_capped() {
        let s = generate_fundamental(0, 100.0, 3000, &JumpParams::default(), 5).unwrap();
        for nu in [1, 9, 12] {
            let view = cointegrate(&s, nu, 0, 77).unwrap();
            let bound = VIEW_DEVIATION_CAP * view_noise_std(nu) + 1e-12;
            for (t, b) in s.values.iter().zip(&view.values) {
                assert!(*b > 0.0);
                assert!(((b - t) / t).abs() <= bound);
            }
        }
    }

    #[test]
    fn stats_of_constant_series_are_zero() {
        let s = FundamentalSeries { asset_id: 0, values: vec![100.0; 30] };
        let v = CointegratedView { agent_id: 0, asset_id: 0, values: vec![100.0; 30] };
        assert_eq!(fundamental_stats(&s, &[v]), JumpStats::default());
    }

    #[test]
    fn one_large_step_per_year() {
        let mut values = vec![100.0; 365];
        for v in values.iter_mut().skip(200) {
            *v = 125.0;
        }
        let s = FundamentalSeries { asset_id: 0, values };
        let st = fundamental_stats(&s, &[]);
        assert_eq!(st.annual_jump_rate, 1.0);
        // amplitude is measured against the post-jump value: 25 / 125
        assert!((st.mean_jump_amplitude_pct - 20.0).abs() < 1e-9);
    }

    #[test]
    fn constant_five_percent_disparity() {
        let s = generate_fundamental(0, 100.0, 100, &JumpParams::default(), 1).unwrap();
        let v = CointegratedView {
            agent_id: 0,
            asset_id: 0,
            values: s.values.iter().map(|x| 1.05 * x).collect(),
        };
        let st = fundamental_stats(&s, &[v]);
        assert!((st.mean_disparity_pct - 5.0).abs() < 1e-9);
        assert!(st.std_disparity_pct < 1e-9);
    }

    #[test]
    fn noise_std_strictly_decreasing() {
        for nu in 1..64 {
            assert!(view_noise_std(nu + 1) < view_noise_std(nu));
        }
    }

    #[test]
    fn views_mean_revert_to_fundamental() {
        let s = generate_fundamental(0, 100.0, 10_000, &JumpParams::default(), 21).unwrap();
        let view = cointegrate(&s, 10, 0, 4).unwrap();
        let mean_ratio =
            s.values.iter().zip(&view.values).map(|(t, b)| b / t).sum::<f64>() / s.values.len() as f64;
        assert!((mean_ratio - 1.0).abs() < 0.01, "mean ratio {mean_ratio}");
    }

    #[test]
    fn disparity_decreases_with_accuracy() {
        let p = JumpParams::default();
        let d: Vec<f64> = [9, 10, 12]
            .iter()
            .map(|&nu| mean_stats(&ensemble_stats(1453, &p, nu, 5, 20, 99).unwrap()).mean_disparity_pct)
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }
}
