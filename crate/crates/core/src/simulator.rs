//! Exact continuous-time simulation of ZI and GZI books (Gillespie direct
//! method).
//!
//! One path is strictly sequential. Independent paths use separate RNG
//! streams (see [`crate::rng`]) and can be generated in parallel with
//! [`simulate_many`].

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};
use crate::model::{BookState, EventCode, IntensitySpec, L1History, L1Record, Tick, TickGrid};
use crate::par;
use crate::rng::{path_rng, SimRng};

/// 2009-03-02 09:40:00 UTC.
pub const DEFAULT_START_NS: i64 = (14_305 * 86_400 + 9 * 3_600 + 40 * 60) * 1_000_000_000;
/// Length of the default 09:40-15:30 session in seconds.
pub const DEFAULT_SESSION_SECS: f64 = 21_000.0;

/// Maps simulated time onto wall-clock timestamps. Time past the end of a
/// session continues at the same time of day on the next calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub start_ns: i64,
    pub session_secs: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self { start_ns: DEFAULT_START_NS, session_secs: DEFAULT_SESSION_SECS }
    }
}

impl SimClock {
    pub fn to_ns(&self, t: f64) -> i64 {
        let day = (t / self.session_secs).floor();
        let within = t - day * self.session_secs;
        self.start_ns + day as i64 * 86_400_000_000_000 + (within * 1e9).round() as i64
    }
}

/// A quote shift outcome: `shift > 0` moves orders away from the spread,
/// `shift < 0` towards it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftOutcome {
    pub shift: i64,
    pub volume: u32,
    pub prob: f64,
}

/// Generalized-model ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GziConfig {
    /// Survival probability of a quote order displaced by an in-spread limit order.
    pub eta: f64,
    /// `mo_volume_law[k]` is the probability of a market order of volume `k + 1`.
    pub mo_volume_law: Vec<f64>,
    /// Probability that a drawn event is replaced by a quote shift.
    pub shift_prob: f64,
    pub shift_law: Vec<ShiftOutcome>,
    /// Limit order arrivals are switched off while the book holds this many orders.
    pub volume_cap: u64,
}

impl GziConfig {
    /// Unit volumes, `eta = 1`, no shifts: reproduces the ZI dynamics.
    pub fn unit(volume_cap: u64) -> Self {
        Self { eta: 1.0, mo_volume_law: vec![1.0], shift_prob: 0.0, shift_law: vec![], volume_cap }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(LobError::InvalidParams(format!("eta must lie in (0,1], got {}", self.eta)));
        }
        let total: f64 = self.mo_volume_law.iter().sum();
        if self.mo_volume_law.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(LobError::InvalidParams(format!("market order volume law sums to {total}")));
        }
        if !(0.0..1.0).contains(&self.shift_prob) {
            return Err(LobError::InvalidParams("shift probability must lie in [0,1)".into()));
        }
        if self.shift_prob > 0.0 {
            let st: f64 = self.shift_law.iter().map(|s| s.prob).sum();
            if (st - 1.0).abs() > 1e-12 || self.shift_law.iter().any(|s| s.shift == 0 || s.volume == 0) {
                return Err(LobError::InvalidParams("invalid shift law".into()));
            }
        }
        if self.volume_cap == 0 {
            return Err(LobError::InvalidParams("volume cap must be positive".into()));
        }
        Ok(())
    }

    fn draw_volume(&self, rng: &mut SimRng) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, p) in self.mo_volume_law.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u32 + 1;
            }
        }
        self.mo_volume_law.len() as u32
    }

    fn draw_shift(&self, rng: &mut SimRng) -> ShiftOutcome {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for s in &self.shift_law {
            acc += s.prob;
            if u < acc {
                return *s;
            }
        }
        *self.shift_law.last().expect("validated shift law is nonempty")
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub spec: IntensitySpec,
    pub grid: TickGrid,
    pub gzi: Option<GziConfig>,
    pub max_events: usize,
    pub burn_in_events: usize,
    pub seed: u64,
    /// RNG stream; distinct streams give independent paths for one seed.
    pub stream: u64,
    pub initial_a: Tick,
    pub initial_b: Tick,
    pub clock: SimClock,
    pub record_books: bool,
}

impl SimConfig {
    pub fn new(spec: IntensitySpec, grid: TickGrid, initial_b: Tick, initial_a: Tick) -> Self {
        Self {
            spec,
            grid,
            gzi: None,
            max_events: 10_000,
            burn_in_events: 0,
            seed: 0,
            stream: 0,
            initial_a,
            initial_b,
            clock: SimClock::default(),
            record_books: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n();
        if !(1..=n).contains(&self.initial_a) || !(1..=n).contains(&self.initial_b) {
            return Err(LobError::InvalidBook("initial quotes must lie on the grid".into()));
        }
        if self.initial_b >= self.initial_a {
            return Err(LobError::InvalidBook(format!(
                "initial bid {} must be below initial ask {}",
                self.initial_b, self.initial_a
            )));
        }
        if let Some(g) = &self.gzi {
            g.validate()?;
        }
        self.spec.validate(&self.grid)?;
        Ok(())
    }
}

/// Draws the initial book: one order at each quote, Poisson depths beyond
/// the quotes and nothing inside the spread.
pub fn sample_initial_book(
    spec: &IntensitySpec,
    grid: &TickGrid,
    a0: Tick,
    b0: Tick,
    rng: &mut SimRng,
) -> Result<BookState> {
    let n = grid.n();
    if b0 >= a0 || a0 > n || b0 < 1 {
        return Err(LobError::InvalidBook(format!("need 1 <= b0 < a0 <= n, got b0={b0}, a0={a0}")));
    }
    let mut ask = vec![0u32; n];
    let mut bid = vec![0u32; n];
    ask[a0 - 1] = 1;
    bid[b0 - 1] = 1;
    for p in a0 + 1..=n {
        ask[p - 1] = poisson(spec.iota_ask[p], rng);
    }
    for p in 1..b0 {
        bid[p - 1] = poisson(spec.iota_bid[p], rng);
    }
    BookState::from_depths(&ask, &bid)
}

fn poisson(mean: f64, rng: &mut SimRng) -> u32 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u32
    }
}

fn binomial(n: u32, p: f64, rng: &mut SimRng) -> u32 {
    if n == 0 || p >= 1.0 {
        return n;
    }
    if p <= 0.0 {
        return 0;
    }
    Binomial::new(n as u64, p).expect("valid binomial").sample(rng) as u32
}

/// Enumerates the possible events of the current book with their
/// intensities, in a fixed order. Limit arrivals are omitted when
/// `limits_allowed` is false.
fn event_rates(book: &BookState, spec: &IntensitySpec, limits_allowed: bool, out: &mut Vec<(EventCode, f64)>) {
    out.clear();
    let m = &spec.model;
    let n = book.n();
    let (a, b) = (book.ask(), book.bid());
    out.push((EventCode::bmo(), m.theta(a, b)));
    out.push((EventCode::smo(), m.vartheta(a, b)));
    if limits_allowed {
        for p in b + 1..=n {
            out.push((EventCode::slo(p), m.kappa(a, b, p)));
        }
        for p in 1..a.min(n + 1) {
            out.push((EventCode::blo(p), m.lambda(a, b, p)));
        }
    }
    for p in a..=n {
        let d = book.ask_depth(p);
        if d > 0 {
            out.push((EventCode::ca(p), d as f64 * m.rho(a, b, p)));
        }
    }
    for p in 1..=b {
        let d = book.bid_depth(p);
        if d > 0 {
            out.push((EventCode::cb(p), d as f64 * m.sigma(a, b, p)));
        }
    }
}

/// Total event intensity of the current book.
pub fn total_intensity(book: &BookState, spec: &IntensitySpec) -> f64 {
    let mut buf = Vec::new();
    event_rates(book, spec, true, &mut buf);
    buf.iter().map(|(_, r)| r).sum()
}

/// Result of one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub dt: f64,
    pub event: EventCode,
}

/// Reusable scratch buffer for stepping a book.
#[derive(Debug, Default)]
pub struct Stepper {
    rates: Vec<(EventCode, f64)>,
}

impl Stepper {
    pub fn new() -> Self {
        Self::default()
    }

    fn draw(&mut self, book: &BookState, spec: &IntensitySpec, limits: bool, rng: &mut SimRng) -> Result<Step> {
        event_rates(book, spec, limits, &mut self.rates);
        let total: f64 = self.rates.iter().map(|(_, r)| r).sum();
        if !(total > 0.0) {
            return Err(LobError::Absorbed);
        }
        let dt = Exp::new(total).expect("positive rate").sample(rng);
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for &(e, r) in &self.rates {
            acc += r;
            if r > 0.0 && target < acc {
                chosen = Some(e);
                break;
            }
        }
        let event = match chosen {
            Some(e) => e,
            // rounding at the upper end: take the last event with positive rate
            None => self.rates.iter().rev().find(|(_, r)| *r > 0.0).map(|(e, _)| *e).expect("positive total"),
        };
        Ok(Step { dt, event })
    }

    /// One ZI event: draws the waiting time and the event and applies it.
    pub fn step(&mut self, book: &mut BookState, spec: &IntensitySpec, rng: &mut SimRng) -> Result<Step> {
        let s = self.draw(book, spec, true, rng)?;
        apply_zi(book, s.event);
        Ok(s)
    }

    /// One GZI event. Market order volumes, quote survival and quote shifts
    /// are drawn from `gzi`; the returned event carries the realized volume.
    pub fn gzi_step(
        &mut self,
        book: &mut BookState,
        spec: &IntensitySpec,
        gzi: &GziConfig,
        rng: &mut SimRng,
    ) -> Result<Step> {
        let limits = book.total_orders() < gzi.volume_cap;
        let Step { dt, event } = self.draw(book, spec, limits, rng)?;
        if gzi.shift_prob > 0.0 && rng.gen::<f64>() < gzi.shift_prob {
            let shift = gzi.draw_shift(rng);
            let on_ask = rng.gen::<bool>();
            let event = apply_shift(book, shift, on_ask);
            return Ok(Step { dt, event });
        }
        let event = match event {
            EventCode::BuyMarket { .. } => {
                let z = gzi.draw_volume(rng);
                consume_asks(book, z);
                EventCode::BuyMarket { volume: z }
            }
            EventCode::SellMarket { .. } => {
                let z = gzi.draw_volume(rng);
                consume_bids(book, z);
                EventCode::SellMarket { volume: z }
            }
            EventCode::SellLimit { tick, .. } => {
                let old = book.ask();
                book.set_ask_depth(tick, book.ask_depth(tick) + 1);
                if tick < old && old <= book.n() && gzi.eta < 1.0 {
                    let survivors = binomial(book.ask_depth(old), gzi.eta, rng);
                    book.set_ask_depth(old, survivors);
                }
                event
            }
            EventCode::BuyLimit { tick, .. } => {
                let old = book.bid();
                book.set_bid_depth(tick, book.bid_depth(tick) + 1);
                if tick > old && old >= 1 && gzi.eta < 1.0 {
                    let survivors = binomial(book.bid_depth(old), gzi.eta, rng);
                    book.set_bid_depth(old, survivors);
                }
                event
            }
            other => {
                apply_zi(book, other);
                other
            }
        };
        Ok(Step { dt, event })
    }
}

fn apply_zi(book: &mut BookState, event: EventCode) {
    match event {
        EventCode::BuyMarket { volume } => consume_asks(book, volume),
        EventCode::SellMarket { volume } => consume_bids(book, volume),
        EventCode::SellLimit { tick, volume } => book.set_ask_depth(tick, book.ask_depth(tick) + volume),
        EventCode::BuyLimit { tick, volume } => book.set_bid_depth(tick, book.bid_depth(tick) + volume),
        EventCode::CancelAsk { tick, volume } => {
            book.set_ask_depth(tick, book.ask_depth(tick).saturating_sub(volume))
        }
        EventCode::CancelBid { tick, volume } => {
            book.set_bid_depth(tick, book.bid_depth(tick).saturating_sub(volume))
        }
        EventCode::ShiftAskLeft { .. }
        | EventCode::ShiftAskRight { .. }
        | EventCode::ShiftBidLeft { .. }
        | EventCode::ShiftBidRight { .. } => unreachable!("shifts are GZI-only"),
    }
}

/// Removes up to `z` sell orders walking up from the ask. No effect on an
/// empty book.
fn consume_asks(book: &mut BookState, mut z: u32) {
    let n = book.n();
    while z > 0 && book.ask() <= n {
        let a = book.ask();
        let take = z.min(book.ask_depth(a));
        book.set_ask_depth(a, book.ask_depth(a) - take);
        z -= take;
    }
}

fn consume_bids(book: &mut BookState, mut z: u32) {
    while z > 0 && book.bid() >= 1 {
        let b = book.bid();
        let take = z.min(book.bid_depth(b));
        book.set_bid_depth(b, book.bid_depth(b) - take);
        z -= take;
    }
}

/// Moves up to `shift.volume` quote orders. Shifts that would cross the
/// opposite quote or hit an empty side leave the book unchanged; orders
/// shifted off the grid leave the book.
fn apply_shift(book: &mut BookState, shift: ShiftOutcome, on_ask: bool) -> EventCode {
    let n = book.n() as i64;
    let d = shift.shift.unsigned_abs() as usize;
    if on_ask {
        let a = book.ask();
        let ev = if shift.shift > 0 {
            EventCode::ShiftAskRight { volume: shift.volume, shift: d }
        } else {
            EventCode::ShiftAskLeft { volume: shift.volume, shift: d }
        };
        if a as i64 > n {
            return ev;
        }
        let target = a as i64 + shift.shift;
        if target <= book.bid() as i64 || target < 1 {
            return ev;
        }
        let moved = shift.volume.min(book.ask_depth(a));
        book.set_ask_depth(a, book.ask_depth(a) - moved);
        if target <= n {
            let t = target as usize;
            book.set_ask_depth(t, book.ask_depth(t) + moved);
        }
        ev
    } else {
        let b = book.bid();
        let ev = if shift.shift > 0 {
            EventCode::ShiftBidLeft { volume: shift.volume, shift: d }
        } else {
            EventCode::ShiftBidRight { volume: shift.volume, shift: d }
        };
        if b == 0 {
            return ev;
        }
        let target = b as i64 - shift.shift;
        if target >= book.ask() as i64 || target > n {
            return ev;
        }
        let moved = shift.volume.min(book.bid_depth(b));
        book.set_bid_depth(b, book.bid_depth(b) - moved);
        if target >= 1 {
            let t = target as usize;
            book.set_bid_depth(t, book.bid_depth(t) + moved);
        }
        ev
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub history: L1History,
    /// Book after each recorded L1 jump (first entry: the initial book),
    /// present when `record_books` is set.
    pub books: Option<Vec<BookState>>,
    /// Counts of all simulated events after burn-in, by code.
    pub event_counts: BTreeMap<String, u64>,
    pub events_simulated: usize,
    pub final_book: BookState,
    /// The chain reached a state with zero total intensity.
    pub absorbed: bool,
}

fn advance(stepper: &mut Stepper, book: &mut BookState, config: &SimConfig, rng: &mut SimRng) -> Result<Step> {
    match &config.gzi {
        Some(g) => stepper.gzi_step(book, &config.spec, g, rng),
        None => stepper.step(book, &config.spec, rng),
    }
}

/// Runs `burn_in_events` unrecorded events and then records `max_events`
/// events. The history holds the initial state plus every instant where
/// `(a, b, q, r)` changes.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut rng = path_rng(config.seed, config.stream);
    let mut book =
        sample_initial_book(&config.spec, &config.grid, config.initial_a, config.initial_b, &mut rng)?;
    let mut stepper = Stepper::new();
    let mut out = SimOutput {
        history: L1History::new(),
        books: config.record_books.then(Vec::new),
        event_counts: BTreeMap::new(),
        events_simulated: 0,
        final_book: book.clone(),
        absorbed: false,
    };
    if config.max_events == 0 {
        return Ok(out);
    }
    for _ in 0..config.burn_in_events {
        advance(&mut stepper, &mut book, config, &mut rng)?;
    }
    let mut t = 0.0;
    let mut last_ts = config.clock.to_ns(0.0);
    out.history.records.push(L1Record { ts_ns: last_ts, state: book.l1(), event: None, trade: None });
    if let Some(books) = out.books.as_mut() {
        books.push(book.clone());
    }
    for _ in 0..config.max_events {
        let before = book.l1();
        let s = match advance(&mut stepper, &mut book, config, &mut rng) {
            Ok(s) => s,
            Err(LobError::Absorbed) => {
                out.absorbed = true;
                break;
            }
            Err(e) => return Err(e),
        };
        t += s.dt;
        out.events_simulated += 1;
        *out.event_counts.entry(s.event.code().to_string()).or_default() += 1;
        let after = book.l1();
        if after != before {
            let ts = config.clock.to_ns(t).max(last_ts + 1);
            last_ts = ts;
            let traded = s.event.traded_amount();
            out.history.records.push(L1Record {
                ts_ns: ts,
                state: after,
                event: Some(s.event),
                trade: (traded != 0).then_some(traded),
            });
            if let Some(books) = out.books.as_mut() {
                books.push(book.clone());
            }
        }
    }
    out.final_book = book;
    Ok(out)
}

/// Evolves `book` until time `horizon` (seconds) and returns the book at
/// that time. An absorbed chain stays put.
pub fn simulate_until(
    mut book: BookState,
    spec: &IntensitySpec,
    gzi: Option<&GziConfig>,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<BookState> {
    let mut stepper = Stepper::new();
    let mut t = 0.0;
    loop {
        let mut trial = book.clone();
        let s = match gzi {
            Some(g) => stepper.gzi_step(&mut trial, spec, g, rng),
            None => stepper.step(&mut trial, spec, rng),
        };
        match s {
            Ok(s) if t + s.dt <= horizon => {
                t += s.dt;
                book = trial;
            }
            Ok(_) | Err(LobError::Absorbed) => return Ok(book),
            Err(e) => return Err(e),
        }
    }
}

/// Simulates `paths` independent paths of `config`, path `i` on RNG stream
/// `i`. Runs in parallel with the `parallel` feature.
pub fn simulate_many(config: &SimConfig, paths: usize) -> Result<Vec<SimOutput>> {
    par::map_range(paths, |i| {
        let mut c = config.clone();
        c.stream = i as u64;
        simulate(&c)
    })
    .into_iter()
    .collect()
}
