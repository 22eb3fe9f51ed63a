use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};
use crate::model::{EventCode, IntensitySpec, L1State};

/// Total rate of L1-changing events and the probability of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRateSummary {
    pub gamma: f64,
    pub pi: Vec<(EventCode, f64)>,
}

impl EventRateSummary {
    pub fn prob(&self, e: &EventCode) -> f64 {
        self.pi.iter().find(|(x, _)| x == e).map_or(0.0, |(_, p)| *p)
    }
}

/// Rates of the events that change the L1 state in `state`. With
/// `quote_multiplier` the quote cancellation rates are scaled by the quote
/// volumes (`q * rho`, `r * sigma`), as for per-order cancellation rates.
/// Market orders against an empty side change nothing and are left out.
pub fn rate_summary(state: &L1State, spec: &IntensitySpec, n: usize, quote_multiplier: bool) -> Result<EventRateSummary> {
    state.validate(n)?;
    let m = &spec.model;
    let (a, b) = (state.a, state.b);
    let mut rates: Vec<(EventCode, f64)> = Vec::new();
    for p in b + 1..=a.min(n) {
        rates.push((EventCode::slo(p), m.kappa(a, b, p)));
    }
    if a <= n {
        rates.push((EventCode::bmo(), m.theta(a, b)));
        let mult = if quote_multiplier { state.q as f64 } else { 1.0 };
        rates.push((EventCode::ca(a), mult * m.rho(a, b, a)));
    }
    for p in b.max(1)..a.min(n + 1) {
        rates.push((EventCode::blo(p), m.lambda(a, b, p)));
    }
    if b >= 1 {
        rates.push((EventCode::smo(), m.vartheta(a, b)));
        let mult = if quote_multiplier { state.r as f64 } else { 1.0 };
        rates.push((EventCode::cb(b), mult * m.sigma(a, b, b)));
    }
    let gamma: f64 = rates.iter().map(|(_, r)| r).sum();
    if !(gamma > 0.0) {
        return Err(LobError::Absorbed);
    }
    let pi = rates.into_iter().filter(|(_, r)| *r > 0.0).map(|(e, r)| (e, r / gamma)).collect();
    Ok(EventRateSummary { gamma, pi })
}

/// Joint density of the waiting time `tau` and the event type `e`:
/// `gamma * exp(-gamma * tau) * pi(e)`.
pub fn event_time_density(tau: f64, e: &EventCode, summary: &EventRateSummary) -> f64 {
    if tau < 0.0 {
        return 0.0;
    }
    summary.gamma * (-summary.gamma * tau).exp() * summary.prob(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, Preset, TickGrid};

    fn smith() -> IntensitySpec {
        preset(&Preset::Smith { theta: 1.0, kappa: 0.5, rho: 0.2 }, &TickGrid::unit(6).unwrap()).unwrap()
    }

    #[test]
    fn hand_sum() {
        let st = L1State { a: 3, b: 1, q: 2, r: 1 };
        let s = rate_summary(&st, &smith(), 6, true).unwrap();
        assert!((s.gamma - 4.6).abs() < 1e-12);
        let total: f64 = s.pi.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((s.prob(&EventCode::ca(3)) - 0.4 / 4.6).abs() < 1e-15);
        let s = rate_summary(&st, &smith(), 6, false).unwrap();
        assert!((s.gamma - 4.4).abs() < 1e-12);
    }

    #[test]
    fn uniform_when_rates_equal() {
        let g = TickGrid::unit(6).unwrap();
        let spec = preset(&Preset::Smith { theta: 1.0, kappa: 1.0, rho: 1.0 }, &g).unwrap();
        let s = rate_summary(&L1State { a: 4, b: 2, q: 1, r: 1 }, &spec, 6, true).unwrap();
        let first = s.pi[0].1;
        assert!(s.pi.iter().all(|(_, p)| (p - first).abs() < 1e-15));
    }

    #[test]
    fn absorbed_state() {
        let g = TickGrid::unit(6).unwrap();
        let spec = preset(&Preset::Smith { theta: 0.0, kappa: 0.0, rho: 0.0 }, &g).unwrap();
        let err = rate_summary(&L1State { a: 4, b: 2, q: 1, r: 1 }, &spec, 6, true).unwrap_err();
        assert_eq!(err, LobError::Absorbed);
    }

    #[test]
    fn density_at_origin() {
        let s = EventRateSummary { gamma: 2.0, pi: vec![(EventCode::bmo(), 0.25), (EventCode::smo(), 0.75)] };
        assert!((event_time_density(0.0, &EventCode::bmo(), &s) - 0.5).abs() < 1e-15);
        let single = EventRateSummary { gamma: 3.0, pi: vec![(EventCode::bmo(), 1.0)] };
        let t = 0.7;
        assert!((event_time_density(t, &EventCode::bmo(), &single) - 3.0 * (-3.0 * t).exp()).abs() < 1e-15);
    }
}
