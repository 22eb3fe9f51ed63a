//! Tick data ingestion: quote and trade CSV files, trading sessions,
//! trade-to-quote matching and estimation samples.
//!
//! Quotes: `ts_ns,bid_px,bid_sz,ask_px,ask_sz`, an empty side has an empty
//! price and size 0. Trades: `ts_ns,px,sz`. Timestamps are nanoseconds
//! since the Unix epoch (UTC).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};
use crate::estimator::{Mode, Sample};
use crate::model::{L1History, L1Record, L1State, TickGrid};

const NS_PER_DAY: i64 = 86_400_000_000_000;
const NS_PER_SEC: i64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub ts_ns: i64,
    pub bid_px: Option<f64>,
    pub bid_sz: u32,
    pub ask_px: Option<f64>,
    pub ask_sz: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub ts_ns: i64,
    pub px: f64,
    pub sz: u32,
}

pub trait Timestamped {
    fn ts_ns(&self) -> i64;
}

impl Timestamped for QuoteRecord {
    fn ts_ns(&self) -> i64 {
        self.ts_ns
    }
}

impl Timestamped for TradeRecord {
    fn ts_ns(&self) -> i64 {
        self.ts_ns
    }
}

/// Parsed records, time-sorted, with the number of out-of-order rows seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub reordered: usize,
}

const QUOTE_HEADER: [&str; 5] = ["ts_ns", "bid_px", "bid_sz", "ask_px", "ask_sz"];
const TRADE_HEADER: [&str; 3] = ["ts_ns", "px", "sz"];

fn read_csv<T, R>(reader: R, header: &[&str]) -> Result<Loaded<T>>
where
    T: for<'de> Deserialize<'de> + Timestamped,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let found = rdr.headers().map_err(|e| LobError::Input(e.to_string()))?.clone();
    if found.is_empty() {
        return Ok(Loaded { records: Vec::new(), reordered: 0 });
    }
    if found.iter().collect::<Vec<_>>() != header {
        return Err(LobError::Input(format!("expected header {}, got {}", header.join(","), found.iter().collect::<Vec<_>>().join(","))));
    }
    let mut records: Vec<T> = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        // line 1 is the header
        let rec: T = row.map_err(|e| LobError::Input(format!("line {}: {e}", i + 2)))?;
        records.push(rec);
    }
    let reordered = records.windows(2).filter(|w| w[1].ts_ns() < w[0].ts_ns()).count();
    if reordered > 0 {
        tracing::warn!(reordered, "timestamps out of order; records sorted");
        records.sort_by_key(|r| r.ts_ns());
    }
    Ok(Loaded { records, reordered })
}

fn validate_quotes(quotes: &[QuoteRecord]) -> Result<()> {
    for (i, q) in quotes.iter().enumerate() {
        if q.bid_px.is_none() != (q.bid_sz == 0) || q.ask_px.is_none() != (q.ask_sz == 0) {
            return Err(LobError::Input(format!("quote {i}: a side has a price iff its size is positive")));
        }
        if let (Some(b), Some(a)) = (q.bid_px, q.ask_px) {
            if a <= b {
                return Err(LobError::Input(format!("quote {i}: ask {a} not above bid {b}")));
            }
        }
    }
    Ok(())
}

pub fn read_quotes<R: Read>(reader: R) -> Result<Loaded<QuoteRecord>> {
    let loaded = read_csv(reader, &QUOTE_HEADER)?;
    validate_quotes(&loaded.records)?;
    Ok(loaded)
}

pub fn read_trades<R: Read>(reader: R) -> Result<Loaded<TradeRecord>> {
    let loaded: Loaded<TradeRecord> = read_csv(reader, &TRADE_HEADER)?;
    if let Some(i) = loaded.records.iter().position(|t| t.sz == 0) {
        return Err(LobError::Input(format!("trade {i}: size must be positive")));
    }
    Ok(loaded)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| LobError::Input(format!("{}: {e}", path.display())))
}

pub fn load_quotes(path: impl AsRef<Path>) -> Result<Loaded<QuoteRecord>> {
    read_quotes(open(path.as_ref())?)
}

pub fn load_trades(path: impl AsRef<Path>) -> Result<Loaded<TradeRecord>> {
    read_trades(open(path.as_ref())?)
}

fn px(v: Option<f64>) -> String {
    v.map(|p| p.to_string()).unwrap_or_default()
}

pub fn write_quotes<W: Write>(writer: W, quotes: &[QuoteRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let io = |e: csv::Error| LobError::Input(e.to_string());
    w.write_record(QUOTE_HEADER).map_err(io)?;
    for q in quotes {
        w.write_record([
            q.ts_ns.to_string(),
            px(q.bid_px),
            q.bid_sz.to_string(),
            px(q.ask_px),
            q.ask_sz.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| LobError::Input(e.to_string()))
}

pub fn write_trades<W: Write>(writer: W, trades: &[TradeRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let io = |e: csv::Error| LobError::Input(e.to_string());
    w.write_record(TRADE_HEADER).map_err(io)?;
    for t in trades {
        w.write_record([t.ts_ns.to_string(), t.px.to_string(), t.sz.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| LobError::Input(e.to_string()))
}

fn grid_price(grid: &TickGrid, tick: usize) -> f64 {
    grid.format_price(tick).parse().expect("formatted price parses")
}

/// One quote row per L1 record.
pub fn quotes_from_history(history: &L1History, grid: &TickGrid) -> Vec<QuoteRecord> {
    let n = grid.n();
    history
        .records
        .iter()
        .map(|r| QuoteRecord {
            ts_ns: r.ts_ns,
            bid_px: (r.state.b >= 1).then(|| grid_price(grid, r.state.b)),
            bid_sz: r.state.r,
            ask_px: (r.state.a <= n).then(|| grid_price(grid, r.state.a)),
            ask_sz: r.state.q,
        })
        .collect()
}

/// One trade row per market order, priced at the quote it hit.
pub fn trades_from_history(history: &L1History, grid: &TickGrid) -> Vec<TradeRecord> {
    let mut out = Vec::new();
    for i in 1..history.len() {
        let rec = &history.records[i];
        let Some(t) = rec.trade else { continue };
        let prev = history.records[i - 1].state;
        let tick = if t < 0 { prev.a } else { prev.b };
        out.push(TradeRecord { ts_ns: rec.ts_ns, px: grid_price(grid, tick), sz: t.unsigned_abs() as u32 });
    }
    out
}

/// Daily trading window `[start, end)`, seconds after midnight UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionWindow {
    pub start_secs: u32,
    pub end_secs: u32,
}

impl Default for SessionWindow {
    fn default() -> Self {
        Self { start_secs: 9 * 3600 + 40 * 60, end_secs: 15 * 3600 + 30 * 60 }
    }
}

/// Parses `HH:MM` or `HH:MM:SS`.
pub fn parse_time_of_day(s: &str) -> Result<u32> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let bad = || LobError::Input(format!("bad time of day {s:?}"));
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let nums: Vec<u32> = parts.iter().map(|p| p.parse::<u32>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (h, m, sec) = (nums[0], nums[1], nums.get(2).copied().unwrap_or(0));
    if h > 24 || m > 59 || sec > 59 || h * 3600 + m * 60 + sec > 86_400 {
        return Err(bad());
    }
    Ok(h * 3600 + m * 60 + sec)
}

pub fn format_time_of_day(secs: u32) -> String {
    format!("{:02}:{:02}:{:02}", secs / 3600, secs / 60 % 60, secs % 60)
}

impl SessionWindow {
    pub fn new(start_secs: u32, end_secs: u32) -> Result<Self> {
        if start_secs >= end_secs {
            return Err(LobError::Input(format!(
                "session start {} not before end {}",
                format_time_of_day(start_secs),
                format_time_of_day(end_secs)
            )));
        }
        Ok(Self { start_secs, end_secs })
    }

    pub fn contains(&self, ts_ns: i64) -> bool {
        let tod = ts_ns.rem_euclid(NS_PER_DAY);
        tod >= self.start_secs as i64 * NS_PER_SEC && tod < self.end_secs as i64 * NS_PER_SEC
    }
}

/// Records inside the window, grouped by calendar day (days since the
/// epoch) in chronological order.
pub fn filter_session<T: Timestamped + Clone>(records: &[T], window: &SessionWindow) -> Result<Vec<(i64, Vec<T>)>> {
    SessionWindow::new(window.start_secs, window.end_secs)?;
    let mut out: Vec<(i64, Vec<T>)> = Vec::new();
    for r in records.iter().filter(|r| window.contains(r.ts_ns())) {
        let day = r.ts_ns().div_euclid(NS_PER_DAY);
        match out.last_mut() {
            Some((d, v)) if *d == day => v.push(r.clone()),
            _ => out.push((day, vec![r.clone()])),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ask,
    Bid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeMatch {
    pub trade_index: usize,
    /// Index of the quote row after the change.
    pub quote_index: usize,
    pub side: Side,
    /// Orders demanded beyond the old quote when the quote was depleted.
    pub s: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matched: Vec<TradeMatch>,
    pub unmatched_count: usize,
    pub match_rate: f64,
}

fn same_price(a: Option<f64>, b: f64, tick: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= 0.5 * tick)
}

/// `(side price, size)` of one side of a quote.
fn side_of(q: &QuoteRecord, side: Side) -> (Option<f64>, u32) {
    match side {
        Side::Ask => (q.ask_px, q.ask_sz),
        Side::Bid => (q.bid_px, q.bid_sz),
    }
}

/// Whether the change `before -> after` on `side` is consistent with a
/// trade of `sz` at `px`; `Some(s)` carries the demand beyond the quote.
fn consistent(before: &QuoteRecord, after: &QuoteRecord, side: Side, px: f64, sz: u32, tick: f64) -> Option<Option<i64>> {
    let (p0, q0) = side_of(before, side);
    let (p1, q1) = side_of(after, side);
    if !same_price(p0, px, tick) {
        return None;
    }
    let p0 = p0?;
    let moved_away = match (p1, side) {
        (None, _) => true,
        (Some(p1), Side::Ask) => p1 > p0 + 0.5 * tick,
        (Some(p1), Side::Bid) => p1 < p0 - 0.5 * tick,
    };
    if moved_away {
        return (q0 <= sz).then_some(Some(sz as i64 - q0 as i64));
    }
    let unchanged = p1.is_some_and(|p1| (p1 - p0).abs() <= 0.5 * tick);
    (unchanged && q0 >= q1 && q0 - q1 == sz).then_some(None)
}

/// Matches each trade on `side` to the nearest consistent quote change
/// within `window_ns`; a tie for the nearest distance leaves the trade
/// unmatched, and a quote change takes at most one trade. Trades on the
/// other side are ignored; trades inside the spread count as unmatched.
pub fn match_trades(
    quotes: &[QuoteRecord],
    trades: &[TradeRecord],
    tick_size: f64,
    window_ns: i64,
    side: Side,
) -> MatchReport {
    let mut order: Vec<usize> = (0..trades.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&trades[i], &trades[j]);
        (a.ts_ns, a.px.to_bits(), a.sz).cmp(&(b.ts_ns, b.px.to_bits(), b.sz))
    });
    let mut used = vec![false; quotes.len()];
    let mut matched = Vec::new();
    let mut unmatched = 0;
    for ti in order {
        let t = &trades[ti];
        // prevailing quote strictly before the trade
        let k = quotes.partition_point(|q| q.ts_ns < t.ts_ns);
        let prevailing = if k > 0 { Some(&quotes[k - 1]) } else { quotes.first() };
        let Some(prev) = prevailing else {
            unmatched += 1;
            continue;
        };
        let at_ask = same_price(prev.ask_px, t.px, tick_size);
        let at_bid = same_price(prev.bid_px, t.px, tick_size);
        let on_side = match side {
            Side::Ask => at_ask,
            Side::Bid => at_bid,
        };
        if !on_side {
            if !(at_ask || at_bid) {
                unmatched += 1;
            }
            continue;
        }
        let lo = quotes.partition_point(|q| q.ts_ns < t.ts_ns - window_ns).max(1);
        let hi = quotes.partition_point(|q| q.ts_ns <= t.ts_ns + window_ns);
        let mut best: Option<(i64, usize, Option<i64>)> = None;
        let mut tied = false;
        for i in lo..hi {
            if used[i] {
                continue;
            }
            let Some(s) = consistent(&quotes[i - 1], &quotes[i], side, t.px, t.sz, tick_size) else { continue };
            let dist = (quotes[i].ts_ns - t.ts_ns).abs();
            match best {
                Some((d, _, _)) if dist > d => {}
                Some((d, _, _)) if dist == d => tied = true,
                _ => {
                    best = Some((dist, i, s));
                    tied = false;
                }
            }
        }
        match best {
            Some((_, i, s)) if !tied => {
                used[i] = true;
                matched.push(TradeMatch { trade_index: ti, quote_index: i, side, s });
            }
            _ => unmatched += 1,
        }
    }
    matched.sort_by_key(|m| m.trade_index);
    let total = matched.len() + unmatched;
    let match_rate = if total == 0 { 0.0 } else { matched.len() as f64 / total as f64 };
    MatchReport { matched, unmatched_count: unmatched, match_rate }
}

fn quote_state(q: &QuoteRecord, grid: &TickGrid, row: usize) -> Result<L1State> {
    let n = grid.n();
    let tick = |p: f64| -> Result<usize> {
        let t = grid.tick_of(p);
        if t < 1 || t > n as i64 {
            return Err(LobError::Input(format!("quote {row}: price {p} is off the grid")));
        }
        Ok(t as usize)
    };
    let a = match q.ask_px {
        Some(p) => tick(p)?,
        None => n + 1,
    };
    let b = match q.bid_px {
        Some(p) => tick(p)?,
        None => 0,
    };
    let state = L1State { a, b, q: q.ask_sz, r: q.bid_sz };
    state.validate(n).map_err(|e| LobError::Input(format!("quote {row}: {e}")))?;
    Ok(state)
}

/// L1 history of one session. Rows that repeat the previous state are
/// skipped; a timestamp that does not increase is moved 1 ns past its
/// predecessor. Matched trades are attached to the quote changes they
/// caused (negative sizes for buys).
pub fn history_from_quotes(
    quotes: &[QuoteRecord],
    grid: &TickGrid,
    trades: &[TradeRecord],
    matches: Option<&MatchReport>,
) -> Result<L1History> {
    let mut trade_at = vec![None; quotes.len()];
    if let Some(m) = matches {
        for tm in &m.matched {
            let sz = trades[tm.trade_index].sz as i64;
            trade_at[tm.quote_index] = Some(match tm.side {
                Side::Ask => -sz,
                Side::Bid => sz,
            });
        }
    }
    let mut h = L1History::new();
    for (i, q) in quotes.iter().enumerate() {
        let state = quote_state(q, grid, i)?;
        let ts = match h.records.last() {
            Some(last) if last.state == state => continue,
            Some(last) => q.ts_ns.max(last.ts_ns + 1),
            None => q.ts_ns,
        };
        h.records.push(L1Record { ts_ns: ts, state, event: None, trade: trade_at[i] });
    }
    Ok(h)
}

/// Grid covering the observed prices with `margin` spare ticks on both
/// sides.
pub fn infer_grid(quotes: &[QuoteRecord], tick_size: f64, margin: usize) -> Result<TickGrid> {
    let prices: Vec<f64> = quotes.iter().flat_map(|q| [q.bid_px, q.ask_px]).flatten().collect();
    if prices.is_empty() {
        return Err(LobError::Input("no prices to infer a grid from".into()));
    }
    let lo = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo_ticks = (lo / tick_size).round();
    let offset = (lo_ticks - margin as f64) * tick_size;
    let span = ((hi / tick_size).round() - lo_ticks) as usize;
    TickGrid::new(span + 2 * margin + 1, tick_size, offset)
}

/// Quotes and trades of one trading session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionData {
    pub day: i64,
    pub quotes: Vec<QuoteRecord>,
    pub trades: Vec<TradeRecord>,
}

/// Splits both streams into sessions; days with quotes define the sessions.
pub fn sessions(quotes: &[QuoteRecord], trades: &[TradeRecord], window: &SessionWindow) -> Result<Vec<SessionData>> {
    let qs = filter_session(quotes, window)?;
    let mut ts = filter_session(trades, window)?.into_iter().peekable();
    let mut out = Vec::new();
    for (day, quotes) in qs {
        while ts.peek().is_some_and(|(d, _)| *d < day) {
            ts.next();
        }
        let trades = match ts.peek() {
            Some((d, _)) if *d == day => ts.next().map(|x| x.1).unwrap_or_default(),
            _ => Vec::new(),
        };
        out.push(SessionData { day, quotes, trades });
    }
    Ok(out)
}

/// Estimation sample over sessions. In GZI mode trades are matched to ask
/// changes first and only matched depletions become observations.
pub fn build_sample(
    sessions: &[SessionData],
    grid: &TickGrid,
    mode: Mode,
    window_ns: i64,
    cap: usize,
) -> Result<(Sample, Vec<MatchReport>)> {
    let per: Vec<Result<(L1History, Option<MatchReport>)>> = crate::par::map_collect(sessions, |s| {
        let report = (mode == Mode::Gzi)
            .then(|| match_trades(&s.quotes, &s.trades, grid.tick_size(), window_ns, Side::Ask));
        let h = history_from_quotes(&s.quotes, grid, &s.trades, report.as_ref())?;
        Ok((h, report))
    });
    let mut histories = Vec::new();
    let mut reports = Vec::new();
    for r in per {
        let (h, rep) = r?;
        histories.push(h);
        reports.extend(rep);
    }
    Ok((Sample::from_histories(&histories, grid.n(), mode, cap), reports))
}
