//! Market loop, ensembles and the noise-agent baseline.

mod config;
mod engine;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::MarketConfig;
pub use engine::{draw_agent, MarketSeries, SimState, INITIAL_PRICE};

use crate::agent::Mode;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub seed: u64,
    pub mode: Mode,
    pub config: MarketConfig,
    pub markets: Vec<MarketSeries>,
    /// `equity[agent][t]`, NAV marked at `P(t)`
    pub equity: Vec<Vec<f64>>,
    pub bankrupt: Vec<bool>,
    pub trade_count: u64,
    pub total_fees: f64,
}

#[derive(Serialize)]
struct Meta<'a> {
    seed: u64,
    mode: Mode,
    config: &'a MarketConfig,
    trade_count: u64,
    total_fees: f64,
    bankrupt_count: usize,
}

impl SimOutput {
    pub fn horizon(&self) -> usize {
        self.markets.first().map_or(0, |m| m.prices.len())
    }

    pub fn bankrupt_fraction(&self) -> f64 {
        if self.bankrupt.is_empty() {
            return 0.0;
        }
        self.bankrupt.iter().filter(|&&b| b).count() as f64 / self.bankrupt.len() as f64
    }

    /// Writes `prices.csv`, `equity.csv` and `meta.json` under `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join("prices.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "asset", "P", "V", "W"])?;
        for (j, m) in self.markets.iter().enumerate() {
            for t in 0..m.prices.len() {
                w.write_record([
                    t.to_string(),
                    j.to_string(),
                    m.prices[t].to_string(),
                    m.volumes[t].to_string(),
                    m.spreads[t].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("equity.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "agent", "nav"])?;
        for t in 0..self.horizon() {
            for (i, curve) in self.equity.iter().enumerate() {
                w.write_record([t.to_string(), i.to_string(), curve[t].to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let meta = Meta {
            seed: self.seed,
            mode: self.mode,
            config: &self.config,
            trade_count: self.trade_count,
            total_fees: self.total_fees,
            bankrupt_count: self.bankrupt.iter().filter(|&&b| b).count(),
        };
        let path = dir.join("meta.json");
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

/// Runs `cfg` with learning agents from the given seed.
pub fn run_with_seed(cfg: &MarketConfig, seed: u64, mode: Mode) -> Result<SimOutput> {
    let mut state = SimState::new(cfg, seed, mode)?;
    state.run_to_end();
    Ok(state.into_output())
}

/// Single learning run seeded by `cfg.master_seed`.
pub fn run(cfg: &MarketConfig) -> Result<SimOutput> {
    run_with_seed(cfg, cfg.master_seed, Mode::Learning)
}

/// Single noise-agent run seeded by `cfg.master_seed`.
pub fn run_noise_baseline(cfg: &MarketConfig) -> Result<SimOutput> {
    run_with_seed(cfg, cfg.master_seed, Mode::Noise)
}

/// Seed of ensemble member `index`.
pub fn member_seed(master_seed: u64, index: usize) -> u64 {
    rng::derive_seed(master_seed, index as u64)
}

/// `size` independent runs; member `s` uses `member_seed(master_seed, s)`.
pub fn run_ensemble(cfg: &MarketConfig, size: usize, mode: Mode, exec: Execution) -> Result<Vec<SimOutput>> {
    if size < 1 {
        return Err(Error::arg("ensemble_size", "must be >= 1"));
    }
    cfg.validate()?;
    par::try_map_range(size, exec, |s| run_with_seed(cfg, member_seed(cfg.master_seed, s), mode))
}

/// Mean final-window return of the agents ranked in the top `fraction` by
/// their return up to the start of that window.
pub fn top_performers_final_return(output: &SimOutput, window: f64, fraction: f64) -> f64 {
    let len = output.horizon();
    let span = ((len as f64 * window).round() as usize).clamp(1, len.saturating_sub(1).max(1));
    let start = len - 1 - span;
    let ratio = |a: f64, b: f64| if a > 0.0 { b / a - 1.0 } else { 0.0 };
    let mut ranked: Vec<(f64, f64)> =
        output.equity.iter().map(|c| (ratio(c[0], c[start]), ratio(c[start], c[len - 1]))).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n = ((ranked.len() as f64 * fraction).round() as usize).clamp(1, ranked.len().max(1));
    ranked[..n.min(ranked.len())].iter().map(|r| r.1).sum::<f64>() / n as f64
}

/// Top-decile agents at 90% of the run, scored on the final 10%.
pub fn top_decile_final_return(output: &SimOutput) -> f64 {
    top_performers_final_return(output, 0.1, 0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub seed: u64,
    pub learning_top_decile: f64,
    pub noise_top_decile: f64,
}

impl BaselineComparison {
    pub fn learning_wins(&self) -> bool {
        self.learning_top_decile > self.noise_top_decile
    }
}

/// Paired learning vs noise runs sharing member seeds.
pub fn compare_with_noise(cfg: &MarketConfig, size: usize, exec: Execution) -> Result<Vec<BaselineComparison>> {
    cfg.validate()?;
    par::try_map_range(size, exec, |s| {
        let seed = member_seed(cfg.master_seed, s);
        let learning = run_with_seed(cfg, seed, Mode::Learning)?;
        let noise = run_with_seed(cfg, seed, Mode::Noise)?;
        Ok(BaselineComparison {
            seed,
            learning_top_decile: top_decile_final_return(&learning),
            noise_top_decile: top_decile_final_return(&noise),
        })
    })
}
