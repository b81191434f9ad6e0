use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MarketConfig;
use crate::agent::{AgentParams, AgentState, AssetHistory, Mode, Portfolio};
use crate::error::Result;
use crate::fundamentals::{self, FundamentalSeries, JumpParams};
use crate::market::{clear_book, sort_book, OrderBook, Trade};
use crate::rng::{self, SimRng};

pub const INITIAL_PRICE: f64 = 100.0;
const BONDS_SCALE: f64 = 1e4;
const HOLDINGS_SCALE: f64 = 100.0;

/// Price, volume and spread series of one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    pub prices: Vec<f64>,
    pub volumes: Vec<u64>,
    pub spreads: Vec<f64>,
}

impl MarketSeries {
    fn new(capacity: usize) -> Self {
        let mut s = Self {
            prices: Vec::with_capacity(capacity),
            volumes: Vec::with_capacity(capacity),
            spreads: Vec::with_capacity(capacity),
        };
        s.prices.push(INITIAL_PRICE);
        s.volumes.push(0);
        s.spreads.push(0.0);
        s
    }

    pub fn history(&self) -> AssetHistory<'_> {
        AssetHistory { prices: &self.prices, volumes: &self.volumes, spreads: &self.spreads }
    }
}

/// Full mutable state of one run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub config: MarketConfig,
    pub mode: Mode,
    pub seed: u64,
    pub t: usize,
    pub markets: Vec<MarketSeries>,
    pub fundamentals: Vec<FundamentalSeries>,
    /// `views[agent][asset]`
    pub views: Vec<Vec<Vec<f64>>>,
    pub agents: Vec<AgentState>,
    /// `equity[agent][t]`
    pub equity: Vec<Vec<f64>>,
    pub cumulative_fees: f64,
    pub trade_count: u64,
    rng: SimRng,
}

/// Draws one agent's parameters and starting portfolio, in the fixed order
/// tau, w, h, bonds, holdings, g, rho, beta, l.
pub fn draw_agent<R: Rng + ?Sized>(cfg: &MarketConfig, rng: &mut R) -> (AgentParams, Portfolio) {
    let horizon = rng.random_range(cfg.week_days..=6 * cfg.month_days);
    let window = rng.random_range(cfg.week_days..=horizon);
    let memory = rng.random_range(cfg.week_days..=cfg.horizon);
    let bonds = Normal::new(0.0, BONDS_SCALE).unwrap().sample(rng).abs();
    let holdings_dist = Normal::new(0.0, HOLDINGS_SCALE).unwrap();
    let holdings: Vec<u64> =
        (0..cfg.asset_count).map(|_| holdings_dist.sample(rng).abs().round() as u64).collect();
    let gesture = cfg.gesture_scalar * rng.random_range(0.2..0.8);
    let reflexivity = rng.random_range(0.0..=1.0);
    let learning_rate = rng.random_range(0.05..=0.20);
    let drawdown_limit = rng.random_range(cfg.drawdown_level - 5.0..=cfg.drawdown_level + 5.0) / 100.0;

    let initial_equity_value = holdings.iter().map(|&q| q as f64 * INITIAL_PRICE).sum();
    (
        AgentParams { window, horizon, memory, gesture, reflexivity, learning_rate, drawdown_limit },
        Portfolio { bonds, holdings, initial_bonds: bonds, initial_equity_value },
    )
}

impl SimState {
    pub fn new(cfg: &MarketConfig, seed: u64, mode: Mode) -> Result<Self> {
        cfg.validate()?;
        let jump = JumpParams::default();
        let fundamentals = (0..cfg.asset_count)
            .map(|j| {
                fundamentals::generate_fundamental(
                    j,
                    INITIAL_PRICE,
                    cfg.horizon,
                    &jump,
                    rng::derive_seed(seed, 1_000 + j as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mut init_rng = rng::stream(seed, 100);
        let mut agents = Vec::with_capacity(cfg.agent_count);
        let mut views = Vec::with_capacity(cfg.agent_count);
        let mut equity = Vec::with_capacity(cfg.agent_count);
        let prices0 = vec![INITIAL_PRICE; cfg.asset_count];
        for i in 0..cfg.agent_count {
            let (params, portfolio) = draw_agent(cfg, &mut init_rng);
            let agent_seed = rng::derive_seed(seed, 2_000_000 + i as u64);
            let agent_views = fundamentals
                .iter()
                .map(|f| fundamentals::cointegrate(f, cfg.cointegration_accuracy, i, agent_seed).map(|v| v.values))
                .collect::<Result<Vec<_>>>()?;
            let mut agent = AgentState::new(i, params, portfolio);
            let nav = agent.portfolio.nav(&prices0);
            agent.track_drawdown(0, nav, cfg.year_days);
            let mut curve = Vec::with_capacity(cfg.horizon);
            curve.push(nav);
            equity.push(curve);
            views.push(agent_views);
            agents.push(agent);
        }

        Ok(Self {
            config: cfg.clone(),
            mode,
            seed,
            t: 0,
            markets: (0..cfg.asset_count).map(|_| MarketSeries::new(cfg.horizon)).collect(),
            fundamentals,
            views,
            agents,
            equity,
            cumulative_fees: 0.0,
            trade_count: 0,
            rng: rng::stream(seed, 200),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.t + 1 >= self.config.horizon
    }

    pub fn current_prices(&self) -> Vec<f64> {
        self.markets.iter().map(|m| m.prices[self.t]).collect()
    }

    pub fn total_bonds(&self) -> f64 {
        self.agents.iter().map(|a| a.portfolio.bonds).sum()
    }

    pub fn total_holdings(&self, asset: usize) -> u64 {
        self.agents.iter().map(|a| a.portfolio.holdings[asset]).sum()
    }

    /// Advances the market by one step: agents act in a freshly shuffled
    /// order, books clear, trades settle, accruals are paid, matured credits
    /// are learned from and drawdowns checked.
    pub fn step(&mut self) {
        if self.is_finished() {
            return;
        }
        let t = self.t;
        let cfg = &self.config;
        let asset_count = cfg.asset_count;
        let fee = cfg.fee_rate;
        let mode = self.mode;

        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);

        let prices_now: Vec<f64> = self.markets.iter().map(|m| m.prices[t]).collect();
        let mut books: Vec<OrderBook> = (0..asset_count).map(OrderBook::new).collect();
        for &i in &order {
            let agent = &mut self.agents[i];
            if agent.bankrupt {
                continue;
            }
            for (j, book) in books.iter_mut().enumerate() {
                let history = self.markets[j].history();
                if let Some(o) = agent.decide(j, history, &self.views[i][j], &prices_now, mode, &mut self.rng) {
                    book.submit(o);
                }
            }
        }

        for (j, book) in books.into_iter().enumerate() {
            let result = clear_book(&sort_book(book), prices_now[j]);
            let mut volume = 0u64;
            let mut last_price = None;
            for trade in &result.trades {
                let qty = settle(&mut self.agents, trade, j, fee);
                if qty == 0 {
                    continue;
                }
                let notional = qty as f64 * trade.price;
                self.cumulative_fees += 2.0 * fee * notional;
                self.trade_count += 1;
                volume += qty;
                last_price = Some(trade.price);
            }
            let market = &mut self.markets[j];
            market.prices.push(last_price.unwrap_or(prices_now[j]));
            market.volumes.push(volume);
            market.spreads.push(result.spread);
        }

        let now = t + 1;
        let prices_next: Vec<f64> = self.markets.iter().map(|m| m.prices[now]).collect();
        let daily_rf = cfg.risk_free_rate / cfg.year_days as f64;
        let daily_stake = cfg.staking_apr / cfg.year_days as f64;
        let (month_days, year_days) = (cfg.month_days, cfg.year_days);
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let was_bankrupt = agent.bankrupt;
            if !was_bankrupt {
                for j in 0..asset_count {
                    agent.finish_step(j, t, mode);
                }
            }
            let equity_value = agent.portfolio.equity_value(&prices_next);
            agent.portfolio.bonds = agent.portfolio.bonds * (1.0 + daily_rf) + daily_stake * equity_value;
            if !was_bankrupt && mode == Mode::Learning {
                for j in 0..asset_count {
                    agent.learn(j, &self.markets[j].prices, &self.views[i][j], month_days);
                }
            }
            let nav = agent.portfolio.bonds + equity_value;
            self.equity[i].push(nav);
            if !was_bankrupt {
                agent.track_drawdown(now, nav, year_days);
            }
        }
        self.t = now;
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step();
        }
    }

    pub fn into_output(self) -> super::SimOutput {
        super::SimOutput {
            seed: self.seed,
            mode: self.mode,
            config: self.config,
            markets: self.markets,
            equity: self.equity,
            bankrupt: self.agents.iter().map(|a| a.bankrupt).collect(),
            trade_count: self.trade_count,
            total_fees: self.cumulative_fees,
        }
    }
}

/// Moves cash and units for one match. The buyer is capped at the units its
/// bonds cover at `price * (1 + fee)`; returns the units exchanged.
fn settle(agents: &mut [AgentState], trade: &Trade, asset: usize, fee: f64) -> u64 {
    let gross = trade.price * (1.0 + fee);
    let buyer_bonds = agents[trade.buyer_id].portfolio.bonds;
    let affordable = if gross > 0.0 { (buyer_bonds / gross).floor().max(0.0) } else { 0.0 };
    let qty = trade.quantity.min(affordable as u64);
    if qty == 0 {
        return 0;
    }
    let notional = qty as f64 * trade.price;
    let buyer = &mut agents[trade.buyer_id];
    buyer.portfolio.bonds -= notional * (1.0 + fee);
    buyer.portfolio.holdings[asset] += qty;
    buyer.record_fill(asset, qty, trade.price);
    let seller = &mut agents[trade.seller_id];
    seller.portfolio.bonds += notional * (1.0 - fee);
    seller.portfolio.holdings[asset] -= qty;
    seller.record_fill(asset, qty, trade.price);
    qty
}
