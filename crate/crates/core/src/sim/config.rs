use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market-wide settings. On disk this is a flat `key = value` file whose keys
/// are exactly these field names; missing keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub agent_count: usize,
    pub asset_count: usize,
    pub horizon: usize,
    pub ensemble_size: usize,
    /// per-trade fee on notional, charged to both sides
    pub fee_rate: f64,
    /// annual risk-free rate on bonds
    pub risk_free_rate: f64,
    /// annual staking yield on crypto holdings, paid in cash
    pub staking_apr: f64,
    pub year_days: usize,
    pub month_days: usize,
    pub week_days: usize,
    pub gesture_scalar: f64,
    pub cointegration_accuracy: u32,
    /// drawdown threshold level, in percent
    pub drawdown_level: f64,
    pub master_seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            agent_count: 500,
            asset_count: 1,
            horizon: 1453,
            ensemble_size: 20,
            fee_rate: 0.001,
            risk_free_rate: 0.01,
            staking_apr: 0.03,
            year_days: 365,
            month_days: 30,
            week_days: 7,
            gesture_scalar: 1.0,
            cointegration_accuracy: 10,
            drawdown_level: 45.0,
            master_seed: 0,
        }
    }
}

impl MarketConfig {
    /// Small preset for CI and quick checks.
    pub fn smoke() -> Self {
        Self { agent_count: 100, horizon: 400, ensemble_size: 3, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.agent_count < 2 {
            return bad(format!("agent_count must be >= 2, got {}", self.agent_count));
        }
        if self.asset_count < 1 {
            return bad("asset_count must be >= 1".into());
        }
        if self.week_days < 1 || self.month_days < 1 || self.year_days < 1 {
            return bad("calendar constants must be positive".into());
        }
        if self.week_days > 6 * self.month_days {
            return bad("week_days must not exceed 6 * month_days".into());
        }
        if self.horizon < 2 * self.week_days {
            return bad(format!("horizon must be >= 2 * week_days ({}), got {}", 2 * self.week_days, self.horizon));
        }
        if self.ensemble_size < 1 {
            return bad("ensemble_size must be >= 1".into());
        }
        for (name, v) in [
            ("fee_rate", self.fee_rate),
            ("risk_free_rate", self.risk_free_rate),
            ("staking_apr", self.staking_apr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.fee_rate >= 1.0 {
            return bad("fee_rate must be < 1".into());
        }
        if !(self.gesture_scalar > 0.0 && self.gesture_scalar.is_finite()) {
            return bad(format!("gesture_scalar must be positive, got {}", self.gesture_scalar));
        }
        if !(1..=64).contains(&self.cointegration_accuracy) {
            return bad(format!("cointegration_accuracy must lie in [1, 64], got {}", self.cointegration_accuracy));
        }
        if !(self.drawdown_level >= 5.0 && self.drawdown_level <= 100.0) {
            return bad(format!("drawdown_level must lie in [5, 100], got {}", self.drawdown_level));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Flat `key = value` text that [`MarketConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        MarketConfig::default().validate().unwrap();
        MarketConfig::smoke().validate().unwrap();
    }

    #[test]
    fn parses_partial_file() {
        let cfg = MarketConfig::parse("agent_count = 50\nhorizon = 100\nfee_rate = 0.0\n").unwrap();
        assert_eq!(cfg.agent_count, 50);
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.fee_rate, 0.0);
        assert_eq!(cfg.asset_count, 1);
    }

    #[test]
    fn text_round_trip() {
        let cfg = MarketConfig { gesture_scalar: 2.5, master_seed: 99, ..MarketConfig::smoke() };
        assert_eq!(MarketConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "agent_count = 1",
            "asset_count = 0",
            "horizon = 10",
            "fee_rate = -0.1",
            "cointegration_accuracy = 0",
            "drawdown_level = 2",
            "unknown_key = 3",
            "agent_count = \"many\"",
        ] {
            let err = MarketConfig::parse(text).unwrap_err();
            assert!(matches!(err, Error::InvalidConfig(_)), "{text}: {err}");
        }
    }
}
