use std::fmt;

use serde::{Deserialize, Serialize};

use super::grid::{L1State, Tick};
use crate::error::{LobError, Result};

/// Book events. Unit-volume (ZI) events carry `volume == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventCode {
    /// Buy market order (BMO).
    #[serde(rename = "BMO")]
    BuyMarket { volume: u32 },
    /// Sell limit order (SLO) at `tick`.
    #[serde(rename = "SLO")]
    SellLimit { tick: Tick, volume: u32 },
    /// Cancellation of sell limit orders (CA) at `tick`.
    #[serde(rename = "CA")]
    CancelAsk { tick: Tick, volume: u32 },
    /// Sell market order (SMO).
    #[serde(rename = "SMO")]
    SellMarket { volume: u32 },
    /// Buy limit order (BLO) at `tick`.
    #[serde(rename = "BLO")]
    BuyLimit { tick: Tick, volume: u32 },
    /// Cancellation of buy limit orders (CB) at `tick`.
    #[serde(rename = "CB")]
    CancelBid { tick: Tick, volume: u32 },
    /// Shift of ask-quote orders towards the spread (SAL).
    #[serde(rename = "SAL")]
    ShiftAskLeft { volume: u32, shift: usize },
    /// Shift of ask-quote orders away from the spread (SAR).
    #[serde(rename = "SAR")]
    ShiftAskRight { volume: u32, shift: usize },
    /// Shift of bid-quote orders away from the spread.
    #[serde(rename = "SBL")]
    ShiftBidLeft { volume: u32, shift: usize },
    /// Shift of bid-quote orders towards the spread.
    #[serde(rename = "SBR")]
    ShiftBidRight { volume: u32, shift: usize },
}

impl EventCode {
    pub fn bmo() -> Self {
        Self::BuyMarket { volume: 1 }
    }

    pub fn smo() -> Self {
        Self::SellMarket { volume: 1 }
    }

    pub fn slo(tick: Tick) -> Self {
        Self::SellLimit { tick, volume: 1 }
    }

    pub fn blo(tick: Tick) -> Self {
        Self::BuyLimit { tick, volume: 1 }
    }

    pub fn ca(tick: Tick) -> Self {
        Self::CancelAsk { tick, volume: 1 }
    }

    pub fn cb(tick: Tick) -> Self {
        Self::CancelBid { tick, volume: 1 }
    }

    /// Short code used in manifests and event counts.
    pub fn code(&self) -> &'static str {
        match self {
            Self::BuyMarket { .. } => "BMO",
            Self::SellLimit { .. } => "SLO",
            Self::CancelAsk { .. } => "CA",
            Self::SellMarket { .. } => "SMO",
            Self::BuyLimit { .. } => "BLO",
            Self::CancelBid { .. } => "CB",
            Self::ShiftAskLeft { .. } => "SAL",
            Self::ShiftAskRight { .. } => "SAR",
            Self::ShiftBidLeft { .. } => "SBL",
            Self::ShiftBidRight { .. } => "SBR",
        }
    }

    pub fn volume(&self) -> u32 {
        match *self {
            Self::BuyMarket { volume }
            | Self::SellMarket { volume }
            | Self::SellLimit { volume, .. }
            | Self::CancelAsk { volume, .. }
            | Self::BuyLimit { volume, .. }
            | Self::CancelBid { volume, .. }
            | Self::ShiftAskLeft { volume, .. }
            | Self::ShiftAskRight { volume, .. }
            | Self::ShiftBidLeft { volume, .. }
            | Self::ShiftBidRight { volume, .. } => volume,
        }
    }

    /// Signed traded amount: `+z` for SMO(z), `-z` for BMO(z), zero otherwise.
    pub fn traded_amount(&self) -> i64 {
        match *self {
            Self::SellMarket { volume } => volume as i64,
            Self::BuyMarket { volume } => -(volume as i64),
            _ => 0,
        }
    }
}

impl fmt::Display for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::BuyMarket { volume } | Self::SellMarket { volume } => {
                write!(f, "{}({volume})", self.code())
            }
            Self::SellLimit { tick, volume }
            | Self::CancelAsk { tick, volume }
            | Self::BuyLimit { tick, volume }
            | Self::CancelBid { tick, volume } => write!(f, "{}({tick},{volume})", self.code()),
            Self::ShiftAskLeft { volume, shift }
            | Self::ShiftAskRight { volume, shift }
            | Self::ShiftBidLeft { volume, shift }
            | Self::ShiftBidRight { volume, shift } => {
                write!(f, "{}({volume},{shift})", self.code())
            }
        }
    }
}

/// One jump of the L1 process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Record {
    /// Nanoseconds since the Unix epoch.
    pub ts_ns: i64,
    pub state: L1State,
    pub event: Option<EventCode>,
    /// Signed trade amount attached to this jump (`+z` SMO, `-z` BMO).
    pub trade: Option<i64>,
}

/// Ordered L1 jumps. The first record is the initial state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct L1History {
    pub records: Vec<L1Record>,
}

impl L1History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inter-event time in seconds before record `i` (zero for the first).
    pub fn dt(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            (self.records[i].ts_ns - self.records[i - 1].ts_ns) as f64 * 1e-9
        }
    }

    /// Time of record `i` in seconds since the first record.
    pub fn t(&self, i: usize) -> f64 {
        (self.records[i].ts_ns - self.records[0].ts_ns) as f64 * 1e-9
    }

    pub fn push(&mut self, record: L1Record) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.ts_ns <= last.ts_ns {
                return Err(LobError::Domain(format!(
                    "timestamps must increase strictly: {} after {}",
                    record.ts_ns, last.ts_ns
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trade_sign_convention() {
        assert_eq!(EventCode::BuyMarket { volume: 4 }.traded_amount(), -4);
        assert_eq!(EventCode::SellMarket { volume: 2 }.traded_amount(), 2);
        assert_eq!(EventCode::ca(3).traded_amount(), 0);
    }

    #[test]
    fn history_requires_increasing_time() {
        let st = L1State { a: 2, b: 1, q: 1, r: 1 };
        let mut h = L1History::new();
        h.push(L1Record { ts_ns: 10, state: st, event: None, trade: None }).unwrap();
        assert!(h.push(L1Record { ts_ns: 10, state: st, event: None, trade: None }).is_err());
        h.push(L1Record { ts_ns: 1_000_000_010, state: st, event: None, trade: None }).unwrap();
        assert!((h.dt(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_tags() {
        let json = serde_json::to_string(&EventCode::slo(3)).unwrap();
        assert_eq!(json, r#"{"kind":"SLO","tick":3,"volume":1}"#);
        let back: EventCode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EventCode::slo(3));
        assert_eq!(EventCode::ShiftAskRight { volume: 2, shift: 1 }.to_string(), "SAR(2,1)");
    }
}
