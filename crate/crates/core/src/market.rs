//! Limit order book and double-auction clearing.
//!
//! Books are rebuilt every step: agents submit at most one limit order per
//! asset, the book is sorted (bids descending, asks ascending, FIFO on ties)
//! and then cleared by walking both sides from the top while the best bid
//! still crosses the best ask.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitOrder {
    pub agent_id: usize,
    pub asset_id: usize,
    pub side: Side,
    pub price: f64,
    pub quantity: u64,
}

impl LimitOrder {
    pub fn bid(agent_id: usize, asset_id: usize, price: f64, quantity: u64) -> Self {
        Self { agent_id, asset_id, side: Side::Bid, price, quantity }
    }

    pub fn ask(agent_id: usize, asset_id: usize, price: f64, quantity: u64) -> Self {
        Self { agent_id, asset_id, side: Side::Ask, price, quantity }
    }

    /// A usable order has a strictly positive finite price and at least one unit.
    pub fn is_valid(&self) -> bool {
        self.price.is_finite() && self.price > 0.0 && self.quantity >= 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderBook {
    pub asset_id: usize,
    pub bids: Vec<LimitOrder>,
    pub asks: Vec<LimitOrder>,
}

impl OrderBook {
    pub fn new(asset_id: usize) -> Self {
        Self { asset_id, bids: Vec::new(), asks: Vec::new() }
    }

    /// Appends an order to its side in submission order. Invalid orders are
    /// dropped and `false` is returned.
    pub fn submit(&mut self, order: LimitOrder) -> bool {
        if !order.is_valid() {
            return false;
        }
        match order.side {
            Side::Bid => self.bids.push(order),
            Side::Ask => self.asks.push(order),
        }
        true
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bids.len() + self.asks.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub buyer_id: usize,
    pub seller_id: usize,
    pub price: f64,
    pub quantity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub trades: Vec<Trade>,
    pub next_price: f64,
    pub volume: u64,
    pub spread: f64,
    /// Unfilled remainder of the book, in priority order.
    pub residual: OrderBook,
}

/// Sorts bids by price descending and asks ascending. The sort is stable, so
/// orders at equal price keep their submission order.
pub fn sort_book(mut book: OrderBook) -> OrderBook {
    book.bids.sort_by(|a, b| b.price.total_cmp(&a.price));
    book.asks.sort_by(|a, b| a.price.total_cmp(&b.price));
    book
}

/// `|mean(bid prices) - mean(ask prices)|`, or 0 when either side is empty.
pub fn compute_spread(book: &OrderBook) -> f64 {
    if book.bids.is_empty() || book.asks.is_empty() {
        return 0.0;
    }
    let mean = |orders: &[LimitOrder]| {
        orders.iter().map(|o| o.price).sum::<f64>() / orders.len() as f64
    };
    (mean(&book.bids) - mean(&book.asks)).abs()
}

/// Clears a sorted book.
///
/// Each match trades `min(remaining bid qty, remaining ask qty)` at the
/// mid-price of the two limit prices. The next market price is the mid-price
/// of the last matched pair, or `prev_price` when nothing crossed. The spread
/// is taken over the submitted (pre-clearing) book.
pub fn clear_book(book: &OrderBook, prev_price: f64) -> ClearingResult {
    let spread = compute_spread(book);
    let mut bids = book.bids.clone();
    let mut asks = book.asks.clone();
    let mut trades = Vec::new();
    let mut next_price = prev_price;
    let mut volume = 0u64;

    let (mut bi, mut ai) = (0usize, 0usize);
    while bi < bids.len() && ai < asks.len() && bids[bi].price >= asks[ai].price {
        let qty = bids[bi].quantity.min(asks[ai].quantity);
        let price = 0.5 * (bids[bi].price + asks[ai].price);
        trades.push(Trade {
            buyer_id: bids[bi].agent_id,
            seller_id: asks[ai].agent_id,
            price,
            quantity: qty,
        });
        volume += qty;
        next_price = price;
        bids[bi].quantity -= qty;
        asks[ai].quantity -= qty;
        if bids[bi].quantity == 0 {
            bi += 1;
        }
        if asks[ai].quantity == 0 {
            ai += 1;
        }
    }

    let residual = OrderBook {
        asset_id: book.asset_id,
        bids: bids.split_off(bi),
        asks: asks.split_off(ai),
    };
    ClearingResult { trades, next_price, volume, spread, residual }
}
