//! Conditional law of the hidden sell-side depths given the L1 history.
//!
//! Given the history up to just before the next L1 jump, the depths at
//! distinct ticks are independent. Below the ask a tick is empty, the ask
//! holds exactly the observed quote volume, and above the ask the depth is
//! `Bi(nu, varpi) + Po(eps + iota)`. The four statistics are advanced
//! incrementally: waiting `dt` with the ask at `a` multiplies `varpi` and
//! `iota` by `delta = exp(-rho dt)` and maps `eps` to
//! `delta * eps + (kappa / rho) * (1 - delta)`, with `kappa`, `rho` taken at
//! the distance `p - a`. A tick is reset when the ask moves below it.

use serde::{Deserialize, Serialize};

use super::bipo::{ln_bipo_pmf, ln_poisson_pmf};
use crate::error::{LobError, Result};
use crate::model::{DistanceRates, EventCode, L1State, Tick};

/// Marginal law of one tick's depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TickLaw {
    /// Surely empty (tick below the ask).
    Empty,
    /// Point mass at the observed quote volume.
    Dirac(u32),
    /// `Bi(nu, varpi) + Po(mu)`.
    BiPo { nu: u32, varpi: f64, mu: f64 },
}

impl TickLaw {
    pub fn ln_pmf(&self, k: u64) -> f64 {
        match *self {
            TickLaw::Empty => {
                if k == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            TickLaw::Dirac(q) => {
                if k == q as u64 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            TickLaw::BiPo { nu, varpi, mu } => ln_bipo_pmf(nu as u64, varpi, mu, k),
        }
    }

    /// `ln P[depth = 0]`.
    pub fn ln_empty(&self) -> f64 {
        match *self {
            TickLaw::Empty => 0.0,
            TickLaw::Dirac(q) => {
                if q == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            TickLaw::BiPo { nu, varpi, mu } => {
                let binom = if nu == 0 {
                    0.0
                } else if varpi >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    nu as f64 * (-varpi).ln_1p()
                };
                binom + ln_poisson_pmf(mu, 0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TickLaw::Empty => 0.0,
            TickLaw::Dirac(q) => q as f64,
            TickLaw::BiPo { nu, varpi, mu } => nu as f64 * varpi + mu,
        }
    }
}

/// Per-tick sufficient statistics of the sell side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickPosterior {
    n: usize,
    ask: Tick,
    q: u32,
    nu: Vec<u32>,
    varpi: Vec<f64>,
    eps: Vec<f64>,
    iota: Vec<f64>,
    /// Index of the jump at which each tick was last reset (0: never).
    reset_at: Vec<usize>,
    jumps: usize,
}

impl TickPosterior {
    /// Law at the start of the history: the ask `a0` holds `q0`, ticks above
    /// are `Po(iota[p])`. `iota` is indexed by tick (length `n + 2`) or empty
    /// for all zeros.
    pub fn new(n: usize, a0: Tick, q0: u32, iota: &[f64]) -> Self {
        let iota = if iota.is_empty() { vec![0.0; n + 2] } else { iota.to_vec() };
        Self {
            n,
            ask: a0,
            q: q0,
            nu: vec![0; n + 2],
            varpi: vec![1.0; n + 2],
            eps: vec![0.0; n + 2],
            iota,
            reset_at: vec![0; n + 2],
            jumps: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The ask prevailing since the last jump.
    pub fn ask(&self) -> Tick {
        self.ask
    }

    pub fn quote_volume(&self) -> u32 {
        self.q
    }

    /// Number of L1 jumps absorbed so far.
    pub fn jumps(&self) -> usize {
        self.jumps
    }

    pub fn reset_at(&self, p: Tick) -> usize {
        self.reset_at[p]
    }

    /// Records a change of the quote volume at an unchanged ask.
    pub fn observe_quote(&mut self, q: u32) {
        self.q = q;
    }

    pub fn law(&self, p: Tick) -> TickLaw {
        if p < self.ask {
            TickLaw::Empty
        } else if p == self.ask {
            TickLaw::Dirac(self.q)
        } else {
            TickLaw::BiPo { nu: self.nu[p], varpi: self.varpi[p], mu: self.eps[p] + self.iota[p] }
        }
    }

    pub fn nu(&self, p: Tick) -> u32 {
        self.nu[p]
    }

    pub fn varpi(&self, p: Tick) -> f64 {
        self.varpi[p]
    }

    pub fn eps(&self, p: Tick) -> f64 {
        self.eps[p]
    }

    pub fn iota(&self, p: Tick) -> f64 {
        self.iota[p]
    }

    /// Lets `dt` seconds pass with the current ask.
    pub fn elapse<R: DistanceRates + ?Sized>(&mut self, dt: f64, rates: &R) {
        for p in self.ask + 1..=self.n {
            let d = p - self.ask;
            let (kappa, rho) = (rates.kappa(d), rates.rho(d));
            if rho > 0.0 {
                let delta = (-rho * dt).exp();
                self.eps[p] = delta * self.eps[p] + kappa / rho * (1.0 - delta);
                self.varpi[p] *= delta;
                self.iota[p] *= delta;
            } else {
                self.eps[p] += kappa * dt;
            }
        }
    }

    /// Same as [`TickPosterior::elapse`] with per-distance rates precomputed:
    /// `kappa[d]`, `rho[d]` for `d = 1..=n`.
    pub fn elapse_tabulated(&mut self, dt: f64, kappa: &[f64], rho: &[f64]) {
        for p in self.ask + 1..=self.n {
            let d = p - self.ask;
            let (k, r) = (kappa[d], rho[d]);
            if r > 0.0 {
                let delta = (-r * dt).exp();
                self.eps[p] = delta * self.eps[p] + k / r * (1.0 - delta);
                self.varpi[p] *= delta;
                self.iota[p] *= delta;
            } else {
                self.eps[p] += k * dt;
            }
        }
    }

    /// Absorbs an observed jump of the ask side to `(new_a, new_q)`. When the
    /// ask moves down, the uncovered ticks restart from their observable
    /// depth (the old quote volume at the old ask, zero elsewhere), with the
    /// old quote thinned by the survival probability `eta`.
    pub fn transition(&mut self, new_a: Tick, new_q: u32, eta: f64) {
        self.jumps += 1;
        if new_a < self.ask {
            for p in new_a + 1..=self.ask.min(self.n) {
                let at_old_quote = p == self.ask;
                self.nu[p] = if at_old_quote { self.q } else { 0 };
                self.varpi[p] = if at_old_quote { eta } else { 1.0 };
                self.eps[p] = 0.0;
                self.iota[p] = 0.0;
                self.reset_at[p] = self.jumps;
            }
        }
        self.ask = new_a;
        self.q = new_q;
    }

    /// One step of the recursion: elapse `dt`, then absorb the jump to
    /// `new_state`. The event itself does not enter the update; it is
    /// checked for consistency with the state change when given.
    pub fn advance<R: DistanceRates + ?Sized>(
        &mut self,
        dt: f64,
        event: Option<EventCode>,
        new_state: &L1State,
        rates: &R,
        eta: f64,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(LobError::Domain(format!("inter-event time must be positive, got {dt}")));
        }
        if let Some(EventCode::SellLimit { tick, .. }) = event {
            if tick < self.ask && new_state.a != tick {
                return Err(LobError::InconsistentContext(format!(
                    "in-spread SLO({tick}) must move the ask to {tick}, got {}",
                    new_state.a
                )));
            }
        }
        self.elapse(dt, rates);
        self.transition(new_state.a, new_state.q, eta);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn laws_below_and_at_the_ask() {
        let post = TickPosterior::new(6, 3, 2, &[]);
        assert_eq!(post.law(1), TickLaw::Empty);
        assert_eq!(post.law(3), TickLaw::Dirac(2));
        assert_eq!(post.law(4), TickLaw::BiPo { nu: 0, varpi: 1.0, mu: 0.0 });
    }

    #[test]
    fn constant_ask_matches_immigration_death() {
        let params = ModelParams::basic(0.7, 0.4);
        let mut a = TickPosterior::new(6, 2, 1, &[]);
        let mut b = a.clone();
        a.elapse(1.3, &params);
        a.elapse(0.4, &params);
        b.elapse(1.7, &params);
        for p in 3..=6 {
            let expected = 0.7 / 0.4 * (1.0 - (-0.4f64 * 1.7).exp());
            assert!((a.eps(p) - expected).abs() < 1e-14);
            assert!((a.eps(p) - b.eps(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn reset_uses_old_quote_volume() {
        let params = ModelParams::basic(1.0, 1.0);
        let mut post = TickPosterior::new(8, 5, 4, &[]);
        post.elapse(0.5, &params);
        post.transition(3, 1, 0.8);
        assert_eq!(post.law(5), TickLaw::BiPo { nu: 4, varpi: 0.8, mu: 0.0 });
        assert_eq!(post.law(4), TickLaw::BiPo { nu: 0, varpi: 1.0, mu: 0.0 });
        assert_eq!(post.reset_at(4), 1);
        assert_eq!(post.reset_at(6), 0);
        assert!(post.eps(6) > 0.0);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let params = ModelParams::basic(1.0, 1.0);
        let mut post = TickPosterior::new(8, 5, 1, &[]);
        let st = L1State { a: 5, b: 1, q: 2, r: 1 };
        assert!(post.advance(0.0, None, &st, &params, 1.0).is_err());
        assert!(post.advance(-1.0, None, &st, &params, 1.0).is_err());
        assert!(post.advance(1.0, None, &st, &params, 1.0).is_ok());
    }

    #[test]
    fn empty_probability() {
        let law = TickLaw::BiPo { nu: 3, varpi: 0.4, mu: 0.7 };
        let expected = 0.6f64.powi(3) * (-0.7f64).exp();
        assert!((law.ln_empty().exp() - expected).abs() < 1e-15);
        assert!((law.ln_pmf(0).exp() - expected).abs() < 1e-15);
    }
}
