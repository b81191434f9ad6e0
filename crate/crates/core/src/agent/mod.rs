//! Learning agents: a forecasting policy and a trading policy per agent,
//! each updated by direct policy search from delayed rewards.

pub mod forecast;
pub mod memory;
pub mod policy;
pub mod trading;

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::market::{LimitOrder, Side};
pub use forecast::{ForecastAction, ForecastState, F_ACTIONS, F_STATES};
pub use memory::{percentile_rank, PercentileMemory};
pub use policy::{select_action, update_policy, PolicyTable};
pub use trading::{OrderContext, OrderKind, PortfolioSnapshot, TradeAction, TradeState, T_ACTIONS, T_STATES};

/// Reward applied to the hindsight-best action by off-policy corrections.
pub const OFF_POLICY_REWARD: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// trading window `w`, steps
    pub window: usize,
    /// investment horizon `tau`, steps
    pub horizon: usize,
    /// memory span `h`, steps
    pub memory: usize,
    /// price gesture `g`
    pub gesture: f64,
    /// reflexivity `rho` in [0, 1]
    pub reflexivity: f64,
    /// learning rate `beta`
    pub learning_rate: f64,
    /// drawdown limit `l`, as a fraction
    pub drawdown_limit: f64,
}

impl AgentParams {
    /// A mid-range parameter set, handy for tests and examples.
    pub fn example() -> Self {
        Self {
            window: 14,
            horizon: 30,
            memory: 200,
            gesture: 0.5,
            reflexivity: 0.5,
            learning_rate: 0.1,
            drawdown_limit: 0.45,
        }
    }

    /// Steps between off-policy corrections: `floor(tau / T_m) + 2`.
    pub fn off_policy_cadence(&self, month_days: usize) -> usize {
        self.horizon / month_days.max(1) + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub bonds: f64,
    pub holdings: Vec<u64>,
    pub initial_bonds: f64,
    pub initial_equity_value: f64,
}

impl Portfolio {
    pub fn equity_value(&self, prices: &[f64]) -> f64 {
        self.holdings.iter().zip(prices).map(|(&q, &p)| q as f64 * p).sum()
    }

    pub fn nav(&self, prices: &[f64]) -> f64 {
        self.bonds + self.equity_value(prices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Forecast,
    Trade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CreditPayload {
    Forecast { projection: f64 },
    /// `quantity` is signed: positive for bought units, negative for sold.
    Trade { quantity: i64, price: f64, context: OrderContext },
}

/// An action awaiting its reward at `issued_at + tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingCredit {
    pub algorithm: Algorithm,
    pub state_index: usize,
    pub action_index: usize,
    pub issued_at: usize,
    pub payload: CreditPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Learning,
    /// Uniformly random actions, no learning; the gate compares against a
    /// fixed 0.5 percentile.
    Noise,
}

/// Read-only market history for one asset, `prices.len() == t + 1`.
#[derive(Debug, Clone, Copy)]
pub struct AssetHistory<'a> {
    pub prices: &'a [f64],
    pub volumes: &'a [u64],
    pub spreads: &'a [f64],
}

impl AssetHistory<'_> {
    pub fn now(&self) -> usize {
        self.prices.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Decision {
    state: usize,
    action: usize,
    context: OrderContext,
    side: Option<Side>,
}

/// Per-asset learning state of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetMemory {
    pub long_variance: PercentileMemory,
    pub short_variance: PercentileMemory,
    pub forecast_error: PercentileMemory,
    pub mu_negative: PercentileMemory,
    pub mu_positive: PercentileMemory,
    pub volume: PercentileMemory,
    pub cashflow: PercentileMemory,
    pub gate: PercentileMemory,
    pub pending: VecDeque<PendingCredit>,
    pub steps_since_trade: usize,
    /// Steps at which a bought position reaches the investment horizon.
    pub exits: VecDeque<usize>,
    decision: Option<Decision>,
    filled_quantity: u64,
    filled_value: f64,
}

impl AssetMemory {
    pub fn new(capacity: usize) -> Self {
        let m = || PercentileMemory::new(capacity);
        Self {
            long_variance: m(),
            short_variance: m(),
            forecast_error: m(),
            mu_negative: m(),
            mu_positive: m(),
            volume: m(),
            cashflow: m(),
            gate: m(),
            pending: VecDeque::new(),
            steps_since_trade: 0,
            exits: VecDeque::new(),
            decision: None,
            filled_quantity: 0,
            filled_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub params: AgentParams,
    pub portfolio: Portfolio,
    pub forecast_policy: PolicyTable,
    pub trade_policy: PolicyTable,
    pub assets: Vec<AssetMemory>,
    pub bankrupt: bool,
    nav_window: VecDeque<(usize, f64)>,
}

impl AgentState {
    pub fn new(id: usize, params: AgentParams, portfolio: Portfolio) -> Self {
        let assets = portfolio.holdings.iter().map(|_| AssetMemory::new(params.memory)).collect();
        Self {
            id,
            params,
            portfolio,
            forecast_policy: PolicyTable::uniform(F_STATES, F_ACTIONS),
            trade_policy: PolicyTable::uniform(T_STATES, T_ACTIONS),
            assets,
            bankrupt: false,
            nav_window: VecDeque::new(),
        }
    }

    /// Runs both algorithms for one asset at the current step and returns
    /// the order to submit, if any.
    #[allow(clippy::too_many_arguments)]
    pub fn decide<R: Rng + ?Sized>(
        &mut self,
        asset: usize,
        market: AssetHistory<'_>,
        view: &[f64],
        current_prices: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Option<LimitOrder> {
        let t = market.now();
        let params = self.params;
        let price = market.prices[t];
        let equity_value = self.portfolio.equity_value(current_prices);
        let snapshot = PortfolioSnapshot {
            bonds: self.portfolio.bonds,
            initial_bonds: self.portfolio.initial_bonds,
            equity_value,
            initial_equity_value: self.portfolio.initial_equity_value,
        };
        let asset_count = self.portfolio.holdings.len();
        let holding = self.portfolio.holdings[asset];
        let mem = &mut self.assets[asset];

        // forecasting
        let long_var = forecast::trailing_variance(market.prices, t, forecast::long_window(&params));
        let short_var = forecast::trailing_variance(market.prices, t, forecast::short_window(&params));
        let p_long = mem.long_variance.push_rank(long_var);
        let p_short = mem.short_variance.push_rank(short_var);
        let gap = forecast::mean_gap(market.prices, view, t, forecast::long_window(&params));
        let f_state = forecast::forecast_state(p_long, p_short, gap);
        let f_action = match mode {
            Mode::Learning => self.forecast_policy.select(f_state.index(), rng),
            Mode::Noise => rng.random_range(0..F_ACTIONS),
        };
        let projection = forecast::forecast(market.prices, view[t], ForecastAction::from_index(f_action), &params, t);
        if mode == Mode::Learning {
            mem.pending.push_back(PendingCredit {
                algorithm: Algorithm::Forecast,
                state_index: f_state.index(),
                action_index: f_action,
                issued_at: t,
                payload: CreditPayload::Forecast { projection },
            });
        }

        // trading
        let mu = (projection - price) / price;
        let p_mu = if mu < 0.0 { mem.mu_negative.push_rank(mu) } else { mem.mu_positive.push_rank(mu) };
        let volume = market.volumes[t];
        let p_volume = mem.volume.push_rank(volume as f64);
        let t_state = trading::trade_state(mu, p_mu, p_long, &snapshot, volume, p_volume);
        let mut t_action = TradeAction::from_index(match mode {
            Mode::Learning => self.trade_policy.select(t_state.index(), rng),
            Mode::Noise => rng.random_range(0..T_ACTIONS),
        });

        mem.steps_since_trade += 1;
        let mut exit_due = false;
        while mem.exits.front().is_some_and(|&due| due <= t) {
            mem.exits.pop_front();
            exit_due = true;
        }
        let context = OrderContext {
            agent_id: self.id,
            asset_id: asset,
            forecast: projection,
            price,
            prev_spread: market.spreads[t],
            gesture: params.gesture,
            bonds: self.portfolio.bonds,
            holding,
            asset_count,
        };

        let dispatch = if exit_due && holding > 0 {
            t_action.a0 = 0;
            true
        } else if t_action.kind() == OrderKind::Hold {
            true
        } else {
            let k = mem.steps_since_trade;
            match mode {
                Mode::Learning => {
                    trading::filter_gate(&mut mem.gate, self.trade_policy.max_prob(t_state.index()), k, params.window)
                }
                Mode::Noise => trading::gate_passes(0.5, k, params.window),
            }
        };
        mem.filled_quantity = 0;
        mem.filled_value = 0.0;
        if !dispatch {
            mem.decision = None;
            return None;
        }
        let order = trading::make_order(&context, t_action);
        mem.decision = Some(Decision {
            state: t_state.index(),
            action: t_action.index(),
            context,
            side: order.map(|o| o.side),
        });
        order
    }

    /// Records a settled fill of this step's order.
    pub fn record_fill(&mut self, asset: usize, quantity: u64, price: f64) {
        let mem = &mut self.assets[asset];
        mem.filled_quantity += quantity;
        mem.filled_value += quantity as f64 * price;
    }

    /// Closes the step for one asset: issues the trading credit and schedules
    /// the exit of any new position.
    pub fn finish_step(&mut self, asset: usize, t: usize, mode: Mode) {
        let horizon = self.params.horizon;
        let mem = &mut self.assets[asset];
        let Some(decision) = mem.decision.take() else { return };
        let filled = mem.filled_quantity;
        let avg_price = if filled > 0 { mem.filled_value / filled as f64 } else { 0.0 };
        if filled > 0 {
            mem.steps_since_trade = 0;
            if decision.side == Some(Side::Bid) {
                mem.exits.push_back(t + horizon);
            }
        }
        if mode == Mode::Noise {
            return;
        }
        let signed = match decision.side {
            Some(Side::Ask) => -(filled as i64),
            _ => filled as i64,
        };
        mem.pending.push_back(PendingCredit {
            algorithm: Algorithm::Trade,
            state_index: decision.state,
            action_index: decision.action,
            issued_at: t,
            payload: CreditPayload::Trade { quantity: signed, price: avg_price, context: decision.context },
        });
    }

    /// Evaluates credits maturing at `now = prices.len() - 1` and applies
    /// off-policy corrections on the agent's cadence.
    pub fn learn(&mut self, asset: usize, prices: &[f64], view: &[f64], month_days: usize) {
        let now = prices.len() - 1;
        let params = self.params;
        let off_policy = now.is_multiple_of(params.off_policy_cadence(month_days));
        let beta = params.learning_rate;
        let price_now = prices[now];
        let mem = &mut self.assets[asset];
        while let Some(credit) = mem.pending.front().copied() {
            if credit.issued_at + params.horizon > now {
                break;
            }
            mem.pending.pop_front();
            match credit.payload {
                CreditPayload::Forecast { projection } => {
                    let err = (projection - price_now).abs() / price_now;
                    let p = mem.forecast_error.push_rank(err);
                    let r = forecast::reward_from_percentile(p);
                    update_policy(&mut self.forecast_policy, credit.state_index, credit.action_index, r, beta);
                    if off_policy {
                        off_policy_correction_forecast(&mut self.forecast_policy, prices, view, &params, &credit);
                    }
                }
                CreditPayload::Trade { quantity, price, context } => {
                    let cf = if quantity >= 0 {
                        trading::reward_t_cashflow(quantity as u64, price, price_now)
                    } else {
                        -trading::reward_t_cashflow(quantity.unsigned_abs(), price, price_now)
                    };
                    let p = mem.cashflow.push_rank(cf);
                    let r = trading::reward_from_cashflow_percentile(p);
                    update_policy(&mut self.trade_policy, credit.state_index, credit.action_index, r, beta);
                    if off_policy {
                        off_policy_correction_trade(&mut self.trade_policy, prices, &context, &credit, beta);
                    }
                }
            }
        }
    }

    /// Tracks NAV against its trailing `window`-step peak and flags the
    /// agent bankrupt once the drawdown exceeds its limit.
    pub fn track_drawdown(&mut self, t: usize, nav: f64, window: usize) -> bool {
        while self.nav_window.back().is_some_and(|&(_, v)| v <= nav) {
            self.nav_window.pop_back();
        }
        self.nav_window.push_back((t, nav));
        while self.nav_window.front().is_some_and(|&(s, _)| s + window <= t) {
            self.nav_window.pop_front();
        }
        let peak = self.nav_window.front().map(|&(_, v)| v).unwrap_or(nav);
        if peak > 0.0 && (peak - nav) / peak > self.params.drawdown_limit {
            self.bankrupt = true;
        }
        self.bankrupt
    }
}

/// Boosts the forecasting action that would have been most accurate for the
/// credit's state, given the price realized at `prices.len() - 1`.
pub fn off_policy_correction_forecast(
    policy: &mut PolicyTable,
    prices: &[f64],
    view: &[f64],
    params: &AgentParams,
    credit: &PendingCredit,
) -> Option<usize> {
    let now = prices.len() - 1;
    let issued = credit.issued_at;
    if issued >= now {
        return None;
    }
    let best = forecast::best_forecast_action(prices, view[issued], params, issued, prices[now]).index();
    update_policy(policy, credit.state_index, best, OFF_POLICY_REWARD, params.learning_rate);
    Some(best)
}

/// Boosts the trading action with the best hindsight cash flow, assuming a
/// fill at the clearing price that followed the decision.
pub fn off_policy_correction_trade(
    policy: &mut PolicyTable,
    prices: &[f64],
    context: &OrderContext,
    credit: &PendingCredit,
    beta: f64,
) -> Option<usize> {
    let now = prices.len() - 1;
    let fill_step = credit.issued_at + 1;
    if fill_step > now {
        return None;
    }
    let best = trading::best_trade_action(context, prices[fill_step], prices[now]).index();
    update_policy(policy, credit.state_index, best, OFF_POLICY_REWARD, beta);
    Some(best)
}
