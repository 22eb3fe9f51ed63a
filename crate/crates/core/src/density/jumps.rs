//! Conditional law of the new ask `(a, q)` after an L1 jump.

use serde::{Deserialize, Serialize};

use super::bipo::{ln_binomial_pmf, ln_poisson_pmf, log_sum_exp};
use super::posterior::{TickLaw, TickPosterior};
use crate::error::{LobError, Result};
use crate::model::{EventCode, L1State, Tick};

/// Tail mass below which infinite sums over the new ask are cut.
pub const DENSITY_TAIL: f64 = 1e-12;
/// Tail mass below which conditional means are cut.
pub const MEAN_TAIL: f64 = 1e-10;

/// Everything a jump density needs: the event, the L1 state before it and
/// the posterior of the hidden depths just before it (elapsed, not yet
/// transitioned).
#[derive(Debug, Clone, Copy)]
pub struct JumpContext<'a> {
    pub event: EventCode,
    pub prior: L1State,
    pub posterior: &'a TickPosterior,
}

impl JumpContext<'_> {
    fn check(&self) -> Result<()> {
        if self.posterior.ask() != self.prior.a || self.posterior.quote_volume() != self.prior.q {
            return Err(LobError::InconsistentContext(format!(
                "posterior ask ({}, {}) differs from prior state ({}, {})",
                self.posterior.ask(),
                self.posterior.quote_volume(),
                self.prior.a,
                self.prior.q
            )));
        }
        Ok(())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// ZI density of `(a_new, q_new)` given the event and the history.
pub fn jump_density_zi(a_new: Tick, q_new: u32, ctx: &JumpContext<'_>) -> Result<f64> {
    ctx.check()?;
    let L1State { a: a_prev, b, q: q_prev, .. } = ctx.prior;
    let n = ctx.posterior.n();
    if ctx.event.volume() != 1 {
        return Err(LobError::InconsistentContext(format!("ZI events have unit volume: {}", ctx.event)));
    }
    let same = indicator(a_new == a_prev && q_new == q_prev);
    match ctx.event {
        EventCode::SellLimit { tick, .. } => {
            if tick <= b {
                return Err(LobError::InconsistentContext(format!("SLO({tick}) at or below the bid {b}")));
            }
            if tick < a_prev {
                Ok(indicator(a_new == tick && q_new == 1))
            } else if tick == a_prev {
                Ok(indicator(a_new == a_prev && q_new == q_prev + 1))
            } else {
                Ok(same)
            }
        }
        EventCode::BuyMarket { .. } | EventCode::CancelAsk { .. } => {
            if let EventCode::CancelAsk { tick, .. } = ctx.event {
                if tick != a_prev {
                    return Ok(same);
                }
            }
            if a_prev > n {
                Ok(same)
            } else if q_prev > 1 {
                Ok(indicator(a_new == a_prev && q_new == q_prev - 1))
            } else {
                Ok(ln_depletion_zi(ctx.posterior, a_new, q_new).exp())
            }
        }
        _ => Ok(same),
    }
}

/// `ln` of the ZI depletion density: all ticks strictly between the old ask
/// and `a_new` are empty and `a_new` holds `q_new >= 1` orders (or the sell
/// side empties, `a_new = n + 1`, `q_new = 0`).
pub fn ln_depletion_zi(post: &TickPosterior, a_new: Tick, q_new: u32) -> f64 {
    let (a_prev, n) = (post.ask(), post.n());
    if a_new <= a_prev || a_new > n + 1 {
        return f64::NEG_INFINITY;
    }
    if (a_new == n + 1) != (q_new == 0) {
        return f64::NEG_INFINITY;
    }
    let mut ln = 0.0;
    for p in a_prev + 1..a_new {
        ln += post.law(p).ln_empty();
    }
    if a_new <= n {
        ln += post.law(a_new).ln_pmf(q_new as u64);
    }
    ln
}

/// Number of in-book orders a depleting event demands beyond the old quote
/// volume: `z - q_prev` for BMO(z), `-z` for SAR(z, .), 0 for a full
/// cancellation of the quote.
pub fn s_value(event: &EventCode, q_prev: u32) -> Result<i64> {
    match *event {
        EventCode::BuyMarket { volume } if volume >= q_prev => Ok(volume as i64 - q_prev as i64),
        EventCode::ShiftAskRight { volume, .. } if volume >= q_prev => Ok(-(volume as i64)),
        EventCode::CancelAsk { volume, .. } if volume == q_prev => Ok(0),
        other => Err(LobError::InconsistentContext(format!(
            "{other} with quote volume {q_prev} does not deplete the ask"
        ))),
    }
}

/// Law of the number of orders strictly between the old ask and a
/// candidate new ask, tracked on `0..=s` only (larger values never enter the
/// densities). The binomial part is convolved tick by tick; the Poisson
/// parts are pooled into one mean.
#[derive(Debug, Clone)]
struct InterveningOrders {
    ln_binom: Vec<f64>,
    mu: f64,
}

impl InterveningOrders {
    fn new(s: usize) -> Self {
        let mut ln_binom = vec![f64::NEG_INFINITY; s + 1];
        ln_binom[0] = 0.0;
        Self { ln_binom, mu: 0.0 }
    }

    fn add(&mut self, law: TickLaw) {
        let TickLaw::BiPo { nu, varpi, mu } = law else {
            unreachable!("ticks above the ask carry Bi+Po laws")
        };
        self.mu += mu;
        if nu == 0 || varpi <= 0.0 {
            return;
        }
        let s = self.ln_binom.len() - 1;
        let kmax = (nu as usize).min(s);
        let lb: Vec<f64> = (0..=kmax).map(|k| ln_binomial_pmf(nu as u64, varpi, k as u64)).collect();
        let old = std::mem::take(&mut self.ln_binom);
        self.ln_binom = (0..=s)
            .map(|j| log_sum_exp((0..=j.min(kmax)).map(|k| old[j - k] + lb[k])))
            .collect();
    }

    /// `ln P[M = j]` for `j = 0..=s`.
    fn ln_pmf(&self) -> Vec<f64> {
        let s = self.ln_binom.len() - 1;
        (0..=s)
            .map(|j| log_sum_exp((0..=j).map(|i| self.ln_binom[i] + ln_poisson_pmf(self.mu, (j - i) as u64))))
            .collect()
    }
}

/// `ln` of the GZI depletion density for an event that demands `s` orders
/// beyond the old quote. Negative `s` has zero density.
pub fn ln_depletion_gzi(post: &TickPosterior, s: i64, a_new: Tick, q_new: u32) -> f64 {
    let (a_prev, n) = (post.ask(), post.n());
    if s < 0 || a_new <= a_prev || a_new > n + 1 || (a_new == n + 1) != (q_new == 0) {
        return f64::NEG_INFINITY;
    }
    let s = s as usize;
    let mut m = InterveningOrders::new(s);
    for p in a_prev + 1..a_new {
        m.add(post.law(p));
    }
    let ln_m = m.ln_pmf();
    if a_new == n + 1 {
        return log_sum_exp(ln_m);
    }
    let law = post.law(a_new);
    log_sum_exp((0..=s).map(|j| ln_m[j] + law.ln_pmf((s + q_new as usize - j) as u64)))
}

/// GZI density of `(a_new, q_new)` on a depleting event; the demanded
/// volume `s` is derived from the event.
pub fn jump_density_gzi(a_new: Tick, q_new: u32, ctx: &JumpContext<'_>) -> Result<f64> {
    ctx.check()?;
    let s = s_value(&ctx.event, ctx.prior.q)?;
    Ok(ln_depletion_gzi(ctx.posterior, s, a_new, q_new).exp())
}

/// Law of the new ask after a depletion, over `a = a_prev + 1 ..= n + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandingLaw {
    pub a_prev: Tick,
    /// `probs[k]` is the probability of landing at `a_prev + 1 + k`.
    pub probs: Vec<f64>,
}

impl LandingLaw {
    /// `E[(a - a_prev)^k]`.
    pub fn moment(&self, k: f64) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| p * ((i + 1) as f64).powf(k)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Landing law of the ask after a depletion demanding `s >= 0` orders
/// beyond the quote, truncated once the unassigned mass drops below `tail`.
pub fn landing_law(post: &TickPosterior, s: i64, tail: f64) -> LandingLaw {
    let (a_prev, n) = (post.ask(), post.n());
    let mut probs = Vec::new();
    if s < 0 {
        return LandingLaw { a_prev, probs };
    }
    if s == 0 {
        // P[land at a] = P[M_a = 0] (1 - P[A^a = 0])
        let mut ln_none = 0.0f64;
        for a in a_prev + 1..=n {
            let ln_empty = post.law(a).ln_empty();
            probs.push(ln_none.exp() * -ln_empty.exp_m1());
            ln_none += ln_empty;
            if ln_none.exp() < tail {
                return LandingLaw { a_prev, probs };
            }
        }
        probs.push(ln_none.exp());
        return LandingLaw { a_prev, probs };
    }
    // P[land at a] = P[M_a <= s] - P[M_{a+1} <= s]
    let mut m = InterveningOrders::new(s as usize);
    let mut cdf = 1.0;
    for a in a_prev + 1..=n {
        m.add(post.law(a));
        let next = log_sum_exp(m.ln_pmf()).exp().min(cdf);
        probs.push(cdf - next);
        cdf = next;
        if cdf < tail {
            return LandingLaw { a_prev, probs };
        }
    }
    probs.push(cdf);
    LandingLaw { a_prev, probs }
}

/// Law of the price impact `m = a_new - a_prev` of a buy market order of
/// volume `z`; `probs[m]` for `m = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactLaw {
    pub probs: Vec<f64>,
}

impl ImpactLaw {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }
}

pub fn price_impact(z: u32, post: &TickPosterior) -> ImpactLaw {
    let q_prev = post.quote_volume();
    if post.ask() > post.n() || z < q_prev {
        return ImpactLaw { probs: vec![1.0] };
    }
    let law = landing_law(post, z as i64 - q_prev as i64, DENSITY_TAIL);
    let mut probs = vec![0.0];
    probs.extend(law.probs);
    ImpactLaw { probs }
}

/// `E[a_new - a_prev]` on a depletion demanding `s` orders beyond the quote.
pub fn conditional_mean_jump(post: &TickPosterior, s: i64) -> f64 {
    landing_law(post, s, MEAN_TAIL).mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn smith_post(n: usize, a: Tick, q: u32, dt: f64) -> TickPosterior {
        let mut p = TickPosterior::new(n, a, q, &[]);
        p.elapse(dt, &ModelParams::basic(0.5, 0.3));
        p
    }

    #[test]
    fn in_spread_insertion_is_certain() {
        let post = smith_post(8, 5, 2, 1.0);
        let prior = L1State { a: 5, b: 2, q: 2, r: 1 };
        let ctx = JumpContext { event: EventCode::slo(3), prior, posterior: &post };
        assert_eq!(jump_density_zi(3, 1, &ctx).unwrap(), 1.0);
        assert_eq!(jump_density_zi(3, 2, &ctx).unwrap(), 0.0);
        assert_eq!(jump_density_zi(5, 2, &ctx).unwrap(), 0.0);
        let at_quote = JumpContext { event: EventCode::slo(5), ..ctx };
        assert_eq!(jump_density_zi(5, 3, &at_quote).unwrap(), 1.0);
        let bad = JumpContext { event: EventCode::slo(2), ..ctx };
        assert!(jump_density_zi(2, 1, &bad).is_err());
    }

    #[test]
    fn decrement_and_identity() {
        let post = smith_post(8, 5, 2, 1.0);
        let prior = L1State { a: 5, b: 2, q: 2, r: 1 };
        let ctx = JumpContext { event: EventCode::bmo(), prior, posterior: &post };
        assert_eq!(jump_density_zi(5, 1, &ctx).unwrap(), 1.0);
        let ctx = JumpContext { event: EventCode::smo(), prior, posterior: &post };
        assert_eq!(jump_density_zi(5, 2, &ctx).unwrap(), 1.0);
        let wrong = L1State { q: 1, ..prior };
        let ctx = JumpContext { event: EventCode::bmo(), prior: wrong, posterior: &post };
        assert!(jump_density_zi(6, 1, &ctx).is_err());
    }

    #[test]
    fn depletion_hand_product() {
        // tick a+1 empty with probability e^{-1/2}, tick a+2 ~ Po(1/2)
        let n = 6;
        let mut post = TickPosterior::new(n, 2, 1, &[]);
        let k = 0.5 / (1.0 - (-1.0f64).exp());
        post.elapse(1.0, &ModelParams::basic(k, 1.0));
        assert!((post.eps(3) - 0.5).abs() < 1e-15 && (post.eps(4) - 0.5).abs() < 1e-15);
        let prior = L1State { a: 2, b: 1, q: 1, r: 1 };
        let ctx = JumpContext { event: EventCode::bmo(), prior, posterior: &post };
        let expected = (-0.5f64).exp() * 0.5 * (-0.5f64).exp();
        assert!((jump_density_zi(4, 1, &ctx).unwrap() - expected).abs() < 1e-15);
        // the adjacent tick: P[Po(1/2) = 1]
        assert!((jump_density_zi(3, 1, &ctx).unwrap() - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn s_values() {
        assert_eq!(s_value(&EventCode::BuyMarket { volume: 5 }, 2).unwrap(), 3);
        assert_eq!(s_value(&EventCode::CancelAsk { tick: 4, volume: 3 }, 3).unwrap(), 0);
        assert_eq!(s_value(&EventCode::ShiftAskRight { volume: 2, shift: 1 }, 2).unwrap(), -2);
        assert!(s_value(&EventCode::BuyMarket { volume: 1 }, 2).is_err());
        assert!(s_value(&EventCode::slo(3), 1).is_err());
    }

    #[test]
    fn zi_density_normalizes() {
        let post = smith_post(12, 4, 1, 2.5);
        let law = landing_law(&post, 0, DENSITY_TAIL);
        let mut total = 0.0;
        for a in 5..=13 {
            let qmax = if a == 13 { 0 } else { 60 };
            for q in 0..=qmax {
                if a <= 12 && q == 0 {
                    continue;
                }
                total += ln_depletion_zi(&post, a, q).exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!((law.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gzi_reduces_to_zi() {
        let post = smith_post(10, 3, 1, 0.8);
        for a in 4..=11 {
            for q in 0..8 {
                let zi = ln_depletion_zi(&post, a, q).exp();
                let gzi = ln_depletion_gzi(&post, 0, a, q).exp();
                assert!((zi - gzi).abs() < 1e-12, "a={a} q={q}: {zi} vs {gzi}");
            }
        }
    }

    #[test]
    fn gzi_adjacent_tick_has_no_convolution() {
        let post = smith_post(10, 3, 2, 0.8);
        let law = post.law(4);
        for q in 1..5 {
            let expected = law.ln_pmf(3 + q as u64).exp();
            assert!((ln_depletion_gzi(&post, 3, 4, q).exp() - expected).abs() < 1e-15);
        }
        assert_eq!(ln_depletion_gzi(&post, -2, 4, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn gzi_huge_demand_empties_the_book() {
        let post = smith_post(6, 2, 1, 0.5);
        let d = ln_depletion_gzi(&post, 10_000, 7, 0).exp();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn impact_laws() {
        let post = smith_post(10, 3, 4, 1.5);
        assert_eq!(price_impact(2, &post).probs, vec![1.0]);
        let law = price_impact(7, &post);
        assert_eq!(law.probs[0], 0.0);
        assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sure_neighbour_gives_unit_mean() {
        let mut post = TickPosterior::new(8, 3, 1, &[]);
        post.transition(3, 1, 1.0);
        // occupy tick 4 surely: reset it from an old quote of 5 orders
        let mut p2 = TickPosterior::new(8, 4, 5, &[]);
        p2.transition(3, 1, 1.0);
        assert_eq!(p2.law(4), TickLaw::BiPo { nu: 5, varpi: 1.0, mu: 0.0 });
        assert!((conditional_mean_jump(&p2, 0) - 1.0).abs() < 1e-15);
    }
}
