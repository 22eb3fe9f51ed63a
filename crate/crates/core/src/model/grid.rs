use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};

/// Index of a price tick. Ticks `1..=n` are real prices; `0` and `n + 1`
/// are the virtual "empty buy book" / "empty sell book" positions.
pub type Tick = usize;

/// Finite integer price grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickGrid {
    n: usize,
    tick_size: f64,
    price_offset: f64,
}

impl TickGrid {
    pub fn new(n: usize, tick_size: f64, price_offset: f64) -> Result<Self> {
        if n < 2 {
            return Err(LobError::InvalidGrid(format!("need at least 2 ticks, got {n}")));
        }
        if !(tick_size.is_finite() && tick_size > 0.0) {
            return Err(LobError::InvalidGrid(format!("tick size must be positive, got {tick_size}")));
        }
        if !price_offset.is_finite() {
            return Err(LobError::InvalidGrid("price offset must be finite".into()));
        }
        Ok(Self { n, tick_size, price_offset })
    }

    /// Grid with unit tick size and tick 1 priced at 1.0.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn price_offset(&self) -> f64 {
        self.price_offset
    }

    /// Virtual ask value of an empty sell book.
    pub fn empty_ask(&self) -> Tick {
        self.n + 1
    }

    pub fn price_of(&self, tick: Tick) -> f64 {
        self.price_offset + (tick as f64 - 1.0) * self.tick_size
    }

    /// `round((price - offset) / tick_size) + 1`, not clamped to the grid.
    pub fn tick_of(&self, price: f64) -> i64 {
        ((price - self.price_offset) / self.tick_size).round() as i64 + 1
    }

    /// Number of decimals needed to print prices on this grid exactly.
    pub fn price_decimals(&self) -> usize {
        for d in 0..=12usize {
            let scale = 10f64.powi(d as i32);
            let ok = |x: f64| ((x * scale).round() - x * scale).abs() < 1e-6;
            if ok(self.tick_size) && ok(self.price_offset) {
                return d;
            }
        }
        12
    }

    pub fn format_price(&self, tick: Tick) -> String {
        format!("{:.*}", self.price_decimals(), self.price_of(tick))
    }
}

/// Full two-sided book. Depth vectors are indexed by tick and have length
/// `n + 2`; slots `0` and `n + 1` are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookState {
    ask_depth: Vec<u32>,
    bid_depth: Vec<u32>,
    ask: Tick,
    bid: Tick,
}

impl BookState {
    pub fn empty(n: usize) -> Self {
        Self { ask_depth: vec![0; n + 2], bid_depth: vec![0; n + 2], ask: n + 1, bid: 0 }
    }

    /// Builds a book from per-tick depths given for ticks `1..=n`.
    pub fn from_depths(ask_depth: &[u32], bid_depth: &[u32]) -> Result<Self> {
        let n = ask_depth.len();
        if bid_depth.len() != n || n < 2 {
            return Err(LobError::InvalidBook("depth vectors must have equal length n >= 2".into()));
        }
        let mut book = Self::empty(n);
        book.ask_depth[1..=n].copy_from_slice(ask_depth);
        book.bid_depth[1..=n].copy_from_slice(bid_depth);
        book.refresh_quotes();
        if book.is_crossed() {
            return Err(LobError::InvalidBook(format!("bid {} >= ask {}", book.bid, book.ask)));
        }
        Ok(book)
    }

    pub fn n(&self) -> usize {
        self.ask_depth.len() - 2
    }

    pub fn ask(&self) -> Tick {
        self.ask
    }

    pub fn bid(&self) -> Tick {
        self.bid
    }

    pub fn ask_depth(&self, tick: Tick) -> u32 {
        self.ask_depth[tick]
    }

    pub fn bid_depth(&self, tick: Tick) -> u32 {
        self.bid_depth[tick]
    }

    pub fn ask_depths(&self) -> &[u32] {
        &self.ask_depth
    }

    pub fn bid_depths(&self) -> &[u32] {
        &self.bid_depth
    }

    pub fn total_orders(&self) -> u64 {
        self.ask_depth.iter().chain(&self.bid_depth).map(|&v| v as u64).sum()
    }

    pub fn is_crossed(&self) -> bool {
        self.ask <= self.n() && self.bid >= 1 && self.bid >= self.ask
    }

    pub fn l1(&self) -> L1State {
        L1State {
            a: self.ask,
            b: self.bid,
            q: self.ask_depth[self.ask],
            r: self.bid_depth[self.bid],
        }
    }

    pub(crate) fn set_ask_depth(&mut self, tick: Tick, depth: u32) {
        self.ask_depth[tick] = depth;
        self.refresh_quotes();
    }

    pub(crate) fn set_bid_depth(&mut self, tick: Tick, depth: u32) {
        self.bid_depth[tick] = depth;
        self.refresh_quotes();
    }

    fn refresh_quotes(&mut self) {
        let n = self.n();
        self.ask = (1..=n).find(|&p| self.ask_depth[p] > 0).unwrap_or(n + 1);
        self.bid = (1..=n).rev().find(|&p| self.bid_depth[p] > 0).unwrap_or(0);
    }
}

/// Observable top of book `(a, b, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct L1State {
    pub a: Tick,
    pub b: Tick,
    pub q: u32,
    pub r: u32,
}

impl L1State {
    /// Checks the L1 invariants against a grid of `n` ticks.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.a < 1 || self.a > n + 1 || self.b > n {
            return Err(LobError::InvalidBook(format!("quote out of grid: {self:?}")));
        }
        if (self.q >= 1) != (self.a <= n) || (self.r >= 1) != (self.b >= 1) {
            return Err(LobError::InvalidBook(format!("volume/quote mismatch: {self:?}")));
        }
        if self.a <= n && self.b >= 1 && self.b >= self.a {
            return Err(LobError::InvalidBook(format!("crossed quotes: {self:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_tiny() {
        assert!(TickGrid::unit(1).is_err());
        assert!(TickGrid::new(4, 0.0, 1.0).is_err());
    }

    #[test]
    fn price_tick_round_trip() {
        let g = TickGrid::new(500, 0.01, 10.0).unwrap();
        for t in 1..=500 {
            assert_eq!(g.tick_of(g.price_of(t)), t as i64);
            let s = g.format_price(t);
            assert_eq!(g.tick_of(s.parse().unwrap()), t as i64);
        }
        assert_eq!(g.price_decimals(), 2);
    }

    #[test]
    fn quotes_follow_depths() {
        let book = BookState::from_depths(&[0, 0, 2, 1], &[1, 0, 0, 0]).unwrap();
        assert_eq!(book.ask(), 3);
        assert_eq!(book.bid(), 1);
        assert_eq!(book.l1(), L1State { a: 3, b: 1, q: 2, r: 1 });
        let empty = BookState::empty(4);
        assert_eq!(empty.l1(), L1State { a: 5, b: 0, q: 0, r: 0 });
        assert!(BookState::from_depths(&[0, 1, 0, 0], &[0, 0, 1, 0]).is_err());
    }

    #[test]
    fn l1_validation() {
        assert!(L1State { a: 3, b: 1, q: 1, r: 1 }.validate(4).is_ok());
        assert!(L1State { a: 5, b: 0, q: 0, r: 0 }.validate(4).is_ok());
        assert!(L1State { a: 5, b: 0, q: 1, r: 0 }.validate(4).is_err());
        assert!(L1State { a: 2, b: 2, q: 1, r: 1 }.validate(4).is_err());
    }
}
