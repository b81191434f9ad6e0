//! Trading algorithm: 108 states x 9 actions, plus the order-timing gate.

use serde::{Deserialize, Serialize};

use super::PercentileMemory;
use crate::market::LimitOrder;

pub const T_STATES: usize = 108;
pub const T_ACTIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeState {
    /// forecast direction: 0 down, 1 flat, 2 up
    pub s0: u8,
    /// long-term volatility tercile
    pub s1: u8,
    /// 0 when bonds fell below 60% of their initial value
    pub s2: u8,
    /// 0 when equity fell below 60% of its initial value
    pub s3: u8,
    /// volume band: 0 no volume, 1 low, 2 normal/high
    pub s4: u8,
}

impl TradeState {
    pub fn index(self) -> usize {
        let (s0, s1, s2, s3, s4) =
            (self.s0 as usize, self.s1 as usize, self.s2 as usize, self.s3 as usize, self.s4 as usize);
        (((s0 * 3 + s1) * 2 + s2) * 2 + s3) * 3 + s4
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < T_STATES);
        let s4 = i % 3;
        let s3 = i / 3 % 2;
        let s2 = i / 6 % 2;
        let s1 = i / 12 % 3;
        let s0 = i / 36;
        Self { s0: s0 as u8, s1: s1 as u8, s2: s2 as u8, s3: s3 as u8, s4: s4 as u8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderKind {
    Sell,
    Hold,
    Buy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeAction {
    /// 0 sell, 1 hold, 2 buy
    pub a0: u8,
    /// price gesture: 0 concede, 1 at valuation, 2 demand
    pub a1: u8,
}

impl TradeAction {
    pub fn index(self) -> usize {
        3 * self.a0 as usize + self.a1 as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < T_ACTIONS);
        Self { a0: (i / 3) as u8, a1: (i % 3) as u8 }
    }

    pub fn kind(self) -> OrderKind {
        match self.a0 {
            0 => OrderKind::Sell,
            1 => OrderKind::Hold,
            _ => OrderKind::Buy,
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..T_ACTIONS).map(Self::from_index)
    }
}

/// Inputs to the trading state that come from the agent's portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioSnapshot {
    pub bonds: f64,
    pub initial_bonds: f64,
    pub equity_value: f64,
    pub initial_equity_value: f64,
}

/// `s0` from the sign of `mu = (H - P) / P` and its percentile in the
/// memory of the same sign.
pub fn direction_band(mu: f64, percentile: f64) -> u8 {
    if mu < 0.0 {
        if percentile >= 0.95 {
            1
        } else {
            0
        }
    } else if percentile < 0.05 {
        1
    } else {
        2
    }
}

pub fn tercile_band(p: f64) -> u8 {
    if p < 0.33 {
        0
    } else if p > 0.67 {
        2
    } else {
        1
    }
}

pub fn volume_band(volume: u64, percentile: f64) -> u8 {
    if volume == 0 {
        0
    } else if percentile < 0.33 {
        1
    } else {
        2
    }
}

pub fn trade_state(
    mu: f64,
    mu_percentile: f64,
    long_var_percentile: f64,
    portfolio: &PortfolioSnapshot,
    volume: u64,
    volume_percentile: f64,
) -> TradeState {
    TradeState {
        s0: direction_band(mu, mu_percentile),
        s1: tercile_band(long_var_percentile),
        s2: u8::from(portfolio.bonds >= 0.6 * portfolio.initial_bonds),
        s3: u8::from(portfolio.equity_value >= 0.6 * portfolio.initial_equity_value),
        s4: volume_band(volume, volume_percentile),
    }
}

/// `min(H, P) + g W`, `min(H, P)`, `min(H, P) - g W` for `a1 = 0, 1, 2`.
pub fn bid_price(forecast: f64, price: f64, gesture: f64, prev_spread: f64, a1: u8) -> f64 {
    forecast.min(price) + (1.0 - a1 as f64) * gesture * prev_spread
}

/// `max(H, P) - g W`, `max(H, P)`, `max(H, P) + g W` for `a1 = 0, 1, 2`.
pub fn ask_price(forecast: f64, price: f64, gesture: f64, prev_spread: f64, a1: u8) -> f64 {
    forecast.max(price) - (1.0 - a1 as f64) * gesture * prev_spread
}

/// Everything needed to turn a trading action into a limit order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderContext {
    pub agent_id: usize,
    pub asset_id: usize,
    pub forecast: f64,
    pub price: f64,
    pub prev_spread: f64,
    pub gesture: f64,
    pub bonds: f64,
    pub holding: u64,
    pub asset_count: usize,
}

impl OrderContext {
    /// Units a buy with gesture `a1` would request: `bonds / (P_ask * J)`,
    /// with the ask-side price of the same gesture as the reference.
    pub fn buy_quantity(&self, a1: u8) -> u64 {
        let reference = ask_price(self.forecast, self.price, self.gesture, self.prev_spread, a1);
        if reference.is_nan() || reference <= 0.0 || self.bonds.is_nan() || self.bonds <= 0.0 {
            return 0;
        }
        let q = (self.bonds / (reference * self.asset_count as f64)).floor();
        if q.is_finite() && q >= 1.0 {
            q.min(u64::MAX as f64 / 2.0) as u64
        } else {
            0
        }
    }
}

/// The limit order for `action`, or `None` for holds and unfillable orders.
pub fn make_order(ctx: &OrderContext, action: TradeAction) -> Option<LimitOrder> {
    let order = match action.kind() {
        OrderKind::Hold => return None,
        OrderKind::Buy => {
            let price = bid_price(ctx.forecast, ctx.price, ctx.gesture, ctx.prev_spread, action.a1);
            LimitOrder::bid(ctx.agent_id, ctx.asset_id, price, ctx.buy_quantity(action.a1))
        }
        OrderKind::Sell => {
            let price = ask_price(ctx.forecast, ctx.price, ctx.gesture, ctx.prev_spread, action.a1);
            LimitOrder::ask(ctx.agent_id, ctx.asset_id, price, ctx.holding)
        }
    };
    order.is_valid().then_some(order)
}

/// Records the current confidence and lets an order through iff its
/// percentile is below `steps_since_trade / window`.
pub fn filter_gate(memory: &mut PercentileMemory, current_max_prob: f64, steps_since_trade: usize, window: usize) -> bool {
    let p = memory.push_rank(current_max_prob);
    gate_passes(p, steps_since_trade, window)
}

pub fn gate_passes(percentile: f64, steps_since_trade: usize, window: usize) -> bool {
    percentile < steps_since_trade as f64 / window.max(1) as f64
}

/// Cash-flow change of a cleared buy of `quantity` units at `cleared_price`
/// marked at `price_now`.
pub fn reward_t_cashflow(quantity: u64, cleared_price: f64, price_now: f64) -> f64 {
    quantity as f64 * (price_now - cleared_price)
}

/// Reward for a cash-flow percentile: larger gains earn more.
pub fn reward_from_cashflow_percentile(p: f64) -> i32 {
    if p < 0.05 {
        -4
    } else if p < 0.25 {
        -2
    } else if p < 0.50 {
        -1
    } else if p < 0.75 {
        1
    } else if p < 0.95 {
        2
    } else {
        4
    }
}

/// Cash flow `action` would have realized had it been placed with `ctx`,
/// assuming it fills at `fill_price` iff its limit crosses that price, and is
/// then marked at `price_now`.
pub fn hypothetical_cashflow(ctx: &OrderContext, action: TradeAction, fill_price: f64, price_now: f64) -> f64 {
    match make_order(ctx, action) {
        None => 0.0,
        Some(order) => match action.kind() {
            OrderKind::Buy if order.price >= fill_price => order.quantity as f64 * (price_now - fill_price),
            OrderKind::Sell if order.price <= fill_price => order.quantity as f64 * (fill_price - price_now),
            _ => 0.0,
        },
    }
}

/// Hindsight-best trading action; ties go to the lowest index.
pub fn best_trade_action(ctx: &OrderContext, fill_price: f64, price_now: f64) -> TradeAction {
    let mut best = TradeAction::from_index(0);
    let mut best_cf = f64::NEG_INFINITY;
    for action in TradeAction::all() {
        let cf = hypothetical_cashflow(ctx, action, fill_price, price_now);
        if cf > best_cf {
            best_cf = cf;
            best = action;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> OrderContext {
        OrderContext {
            agent_id: 1,
            asset_id: 0,
            forecast: 95.0,
            price: 100.0,
            prev_spread: 4.0,
            gesture: 0.5,
            bonds: 1000.0,
            holding: 0,
            asset_count: 1,
        }
    }

    fn snapshot(bonds: f64) -> PortfolioSnapshot {
        PortfolioSnapshot { bonds, initial_bonds: 1000.0, equity_value: 500.0, initial_equity_value: 500.0 }
    }

    #[test]
    fn index_round_trip() {
        for i in 0..T_STATES {
            assert_eq!(TradeState::from_index(i).index(), i);
        }
        for i in 0..T_ACTIONS {
            assert_eq!(TradeAction::from_index(i).index(), i);
        }
    }

    #[test]
    fn state_bands() {
        assert_eq!(trade_state(0.01, 0.5, 0.5, &snapshot(1000.0), 0, 0.9).s4, 0);
        assert_eq!(trade_state(0.01, 0.5, 0.5, &snapshot(500.0), 3, 0.9).s2, 0);
        assert_eq!(trade_state(0.01, 0.5, 0.5, &snapshot(600.0), 3, 0.9).s2, 1);
        // mu = 0 goes to the positive memory; an empty memory ranks at 0.5
        let empty = PercentileMemory::new(5);
        assert_eq!(direction_band(0.0, empty.rank(0.0)), 2);
        assert_eq!(direction_band(-0.1, 0.5), 0);
        assert_eq!(direction_band(-0.1, 0.97), 1);
        assert_eq!(direction_band(0.1, 0.01), 1);
        assert_eq!(tercile_band(0.2), 0);
        assert_eq!(tercile_band(0.5), 1);
        assert_eq!(tercile_band(0.9), 2);
        assert_eq!(volume_band(5, 0.2), 1);
        assert_eq!(volume_band(5, 0.5), 2);
    }

    #[test]
    fn bid_with_conceding_gesture() {
        assert_eq!(bid_price(95.0, 100.0, 0.5, 4.0, 0), 97.0);
        assert_eq!(bid_price(95.0, 100.0, 0.5, 4.0, 1), 95.0);
        assert_eq!(bid_price(95.0, 100.0, 0.5, 4.0, 2), 93.0);
        assert_eq!(ask_price(95.0, 100.0, 0.5, 4.0, 0), 98.0);
        assert_eq!(ask_price(95.0, 100.0, 0.5, 4.0, 2), 102.0);
    }

    #[test]
    fn buy_quantity_uses_ask_reference() {
        let c = OrderContext { forecast: 10.0, price: 10.0, prev_spread: 0.0, bonds: 1000.0, ..ctx() };
        let order = make_order(&c, TradeAction { a0: 2, a1: 1 }).unwrap();
        assert_eq!(order.quantity, 100);
        let c2 = OrderContext { asset_count: 3, ..c };
        assert_eq!(make_order(&c2, TradeAction { a0: 2, a1: 1 }).unwrap().quantity, 33);
    }

    #[test]
    fn degenerate_orders() {
        assert!(make_order(&ctx(), TradeAction { a0: 0, a1: 1 }).is_none());
        assert!(make_order(&ctx(), TradeAction { a0: 1, a1: 0 }).is_none());
        let broke = OrderContext { bonds: 50.0, ..ctx() };
        assert!(make_order(&broke, TradeAction { a0: 2, a1: 1 }).is_none());
        let huge_spread = OrderContext { prev_spread: 1000.0, ..ctx() };
        assert!(make_order(&huge_spread, TradeAction { a0: 2, a1: 2 }).is_none());
        let seller = OrderContext { holding: 7, ..ctx() };
        let ask = make_order(&seller, TradeAction { a0: 0, a1: 1 }).unwrap();
        assert_eq!(ask.quantity, 7);
        assert_eq!(ask.price, 100.0);
    }

    #[test]
    fn gate_thresholds() {
        assert!(gate_passes(0.2, 10, 20));
        assert!(!gate_passes(0.0, 0, 20));
        assert!(gate_passes(0.99, 20, 20));
        let mut m = PercentileMemory::new(10);
        assert!(!filter_gate(&mut m, 0.3, 0, 5));
        assert!(filter_gate(&mut m, 0.3, 5, 5));
    }

    #[test]
    fn cashflow() {
        assert_eq!(reward_t_cashflow(10, 100.0, 110.0), 100.0);
        assert_eq!(reward_t_cashflow(0, 100.0, 110.0), 0.0);
        assert_eq!(reward_t_cashflow(10, 100.0, 100.0), 0.0);
    }

    #[test]
    fn hindsight_prefers_profitable_direction() {
        let c = OrderContext { forecast: 100.0, holding: 10, ..ctx() };
        // price rose from 100 to 120: a crossing buy is best
        assert_eq!(best_trade_action(&c, 100.0, 120.0).kind(), OrderKind::Buy);
        // price fell to 80: selling at 100 is best
        assert_eq!(best_trade_action(&c, 100.0, 80.0).kind(), OrderKind::Sell);
        // nothing moves: all zero, lowest index wins
        assert_eq!(best_trade_action(&c, 100.0, 100.0).index(), 0);
    }

    proptest! {
        #[test]
        fn gesture_monotonicity(h in 1.0f64..200.0, p in 1.0f64..200.0, g in 0.0f64..3.0, w in 0.0f64..20.0) {
            let bids: Vec<f64> = (0..3).map(|a| bid_price(h, p, g, w, a)).collect();
            let asks: Vec<f64> = (0..3).map(|a| ask_price(h, p, g, w, a)).collect();
            prop_assert!(bids[0] >= bids[1] && bids[1] >= bids[2]);
            prop_assert!(asks[0] <= asks[1] && asks[1] <= asks[2]);
        }

        #[test]
        fn sell_never_exceeds_holding(holding in 0u64..1000, a1 in 0u8..3) {
            let c = OrderContext { holding, ..ctx() };
            match make_order(&c, TradeAction { a0: 0, a1 }) {
                Some(o) => prop_assert!(o.quantity <= holding),
                None => prop_assert!(holding == 0),
            }
        }

        #[test]
        fn cashflow_reward_monotone(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(reward_from_cashflow_percentile(lo) <= reward_from_cashflow_percentile(hi));
        }
    }
}
