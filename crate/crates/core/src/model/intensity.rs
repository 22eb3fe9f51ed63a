use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Tick, TickGrid};
use super::params::ModelParams;
use crate::error::{LobError, Result};

/// State-dependent intensities of the order flow. `a` and `b` are the
/// current ask and bid; `p` is the tick of the order. Rates are per second.
///
/// `rho` and `sigma` are per-order rates; the intensity of a cancellation at
/// tick `p` is the depth at `p` times the rate.
pub trait IntensityModel: Debug + Send + Sync {
    fn theta(&self, a: Tick, b: Tick) -> f64;
    fn vartheta(&self, a: Tick, b: Tick) -> f64;
    fn kappa(&self, a: Tick, b: Tick, p: Tick) -> f64;
    fn lambda(&self, a: Tick, b: Tick, p: Tick) -> f64;
    fn rho(&self, a: Tick, b: Tick, p: Tick) -> f64;
    fn sigma(&self, a: Tick, b: Tick, p: Tick) -> f64;
}

/// Intensities plus the Poisson means of the initial book depths.
#[derive(Debug, Clone)]
pub struct IntensitySpec {
    pub model: Arc<dyn IntensityModel>,
    /// Initial sell-side means indexed by tick (length `n + 2`).
    pub iota_ask: Vec<f64>,
    /// Initial buy-side means indexed by tick (length `n + 2`).
    pub iota_bid: Vec<f64>,
}

/// Outcome of [`IntensitySpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    /// All of `theta`, `vartheta`, `rho`, `sigma` are strictly positive on the
    /// grid, which guarantees ergodicity of the book.
    pub ergodic: bool,
}

impl IntensitySpec {
    pub fn new(model: Arc<dyn IntensityModel>, n: usize) -> Self {
        Self { model, iota_ask: vec![0.0; n + 2], iota_bid: vec![0.0; n + 2] }
    }

    pub fn with_iota(mut self, iota_ask: Vec<f64>, iota_bid: Vec<f64>) -> Self {
        self.iota_ask = iota_ask;
        self.iota_bid = iota_bid;
        self
    }

    /// Exhaustive check over all admissible `(a, b, p)` on the grid.
    pub fn validate(&self, grid: &TickGrid) -> Result<Validation> {
        let n = grid.n();
        if self.iota_ask.len() != n + 2 || self.iota_bid.len() != n + 2 {
            return Err(LobError::InvalidIntensity(format!("iota vectors must have length {}", n + 2)));
        }
        if let Some(x) = self.iota_ask.iter().chain(&self.iota_bid).find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(LobError::InvalidIntensity(format!("negative or non-finite iota {x}")));
        }
        let m = &self.model;
        let bad = |what: &str, x: f64, a: Tick, b: Tick, p: Tick| {
            LobError::InvalidIntensity(format!("{what}({a},{b},{p}) = {x}"))
        };
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        let mut ergodic = true;
        for a in 1..=n + 1 {
            for b in 0..a.min(n + 1) {
                let (th, vt) = (m.theta(a, b), m.vartheta(a, b));
                if !ok(th) {
                    return Err(bad("theta", th, a, b, 0));
                }
                if !ok(vt) {
                    return Err(bad("vartheta", vt, a, b, 0));
                }
                ergodic &= th > 0.0 && vt > 0.0;
                for p in 1..=n {
                    let rates = [
                        ("kappa", m.kappa(a, b, p)),
                        ("lambda", m.lambda(a, b, p)),
                        ("rho", m.rho(a, b, p)),
                        ("sigma", m.sigma(a, b, p)),
                    ];
                    for (name, x) in rates {
                        if !ok(x) {
                            return Err(bad(name, x, a, b, p));
                        }
                    }
                    ergodic &= rates[2].1 > 0.0 && rates[3].1 > 0.0;
                }
            }
        }
        if !ergodic {
            tracing::warn!("intensity specification does not satisfy the ergodicity precondition");
        }
        Ok(Validation { ergodic })
    }
}

/// Constant intensities (bounded Smith et al. model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smith {
    pub theta: f64,
    pub kappa: f64,
    pub rho: f64,
}

impl IntensityModel for Smith {
    fn theta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn vartheta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn kappa(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        self.kappa
    }
    fn lambda(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        self.kappa
    }
    fn rho(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        self.rho
    }
    fn sigma(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        self.rho
    }
}

/// Cont–Stoikov–Talreja intensities: limit and cancellation rates depend on
/// the distance to the opposite quote. Entry `d - 1` holds the rate at
/// distance `d`; distances past the end reuse the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cont {
    pub theta: f64,
    pub kappa: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Cont {
    fn at(v: &[f64], d: usize) -> f64 {
        if d == 0 {
            return 0.0;
        }
        v[(d - 1).min(v.len() - 1)]
    }
}

impl IntensityModel for Cont {
    fn theta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn vartheta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn kappa(&self, _: Tick, b: Tick, p: Tick) -> f64 {
        Self::at(&self.kappa, p.saturating_sub(b))
    }
    fn lambda(&self, a: Tick, _: Tick, p: Tick) -> f64 {
        Self::at(&self.kappa, a.saturating_sub(p))
    }
    fn rho(&self, _: Tick, b: Tick, p: Tick) -> f64 {
        Self::at(&self.rho, p.saturating_sub(b))
    }
    fn sigma(&self, a: Tick, _: Tick, p: Tick) -> f64 {
        Self::at(&self.rho, a.saturating_sub(p))
    }
}

/// Discretised Luckock model. `k_cdf[x]` and `l_cdf[x]` hold `K(x)` and
/// `L(x)` for `x = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Luckock {
    pub k_cdf: Vec<f64>,
    pub l_cdf: Vec<f64>,
}

impl Luckock {
    fn cdf(v: &[f64], x: usize) -> f64 {
        v[x.min(v.len() - 1)]
    }
}

impl IntensityModel for Luckock {
    fn theta(&self, _: Tick, b: Tick) -> f64 {
        Self::cdf(&self.k_cdf, b)
    }
    fn vartheta(&self, a: Tick, _: Tick) -> f64 {
        1.0 - Self::cdf(&self.l_cdf, a - 1)
    }
    fn kappa(&self, _: Tick, _: Tick, p: Tick) -> f64 {
        Self::cdf(&self.k_cdf, p) - Self::cdf(&self.k_cdf, p - 1)
    }
    fn lambda(&self, _: Tick, _: Tick, p: Tick) -> f64 {
        Self::cdf(&self.l_cdf, p) - Self::cdf(&self.l_cdf, p - 1)
    }
    fn rho(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        0.0
    }
    fn sigma(&self, _: Tick, _: Tick, _: Tick) -> f64 {
        0.0
    }
}

/// Intensities whose in-book part depends only on the distance to the own
/// quote (`ModelParams`), with constant spread-side rates. The bid side is
/// the mirror image of the ask side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceIntensity {
    pub params: ModelParams,
    /// Market order rate on each side.
    pub theta: f64,
    /// Limit order rate at every tick inside the spread or at the quote.
    pub kappa_spread: f64,
    /// Per-order cancellation rate at the quote.
    pub rho_quote: f64,
}

impl IntensityModel for DistanceIntensity {
    fn theta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn vartheta(&self, _: Tick, _: Tick) -> f64 {
        self.theta
    }
    fn kappa(&self, a: Tick, _: Tick, p: Tick) -> f64 {
        if p > a {
            self.params.kappa_at(p - a)
        } else {
            self.kappa_spread
        }
    }
    fn lambda(&self, _: Tick, b: Tick, p: Tick) -> f64 {
        if p < b {
            self.params.kappa_at(b - p)
        } else {
            self.kappa_spread
        }
    }
    fn rho(&self, a: Tick, _: Tick, p: Tick) -> f64 {
        if p > a {
            self.params.rho_at(p - a)
        } else {
            self.rho_quote
        }
    }
    fn sigma(&self, _: Tick, b: Tick, p: Tick) -> f64 {
        if p < b {
            self.params.rho_at(b - p)
        } else {
            self.rho_quote
        }
    }
}

/// Named preset constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum Preset {
    Smith { theta: f64, kappa: f64, rho: f64 },
    Cont { theta: f64, kappa: Vec<f64>, rho: Vec<f64> },
    Luckock { k_cdf: Vec<f64>, l_cdf: Vec<f64> },
    /// Luckock with `K(x) = L(x) = x / n` on the grid.
    Stigler,
}

/// Builds the intensity specification of a preset on `grid` with `iota = 0`.
pub fn preset(p: &Preset, grid: &TickGrid) -> Result<IntensitySpec> {
    let n = grid.n();
    let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
    let model: Arc<dyn IntensityModel> = match p {
        Preset::Smith { theta, kappa, rho } => {
            if ![*theta, *kappa, *rho].into_iter().all(finite_nonneg) {
                return Err(LobError::InvalidIntensity("smith constants must be nonnegative".into()));
            }
            Arc::new(Smith { theta: *theta, kappa: *kappa, rho: *rho })
        }
        Preset::Cont { theta, kappa, rho } => {
            if kappa.is_empty() || rho.is_empty() {
                return Err(LobError::InvalidIntensity("cont needs kappa and rho profiles".into()));
            }
            Arc::new(Cont { theta: *theta, kappa: kappa.clone(), rho: rho.clone() })
        }
        Preset::Luckock { k_cdf, l_cdf } => {
            check_cdf(k_cdf, n, "K")?;
            check_cdf(l_cdf, n, "L")?;
            Arc::new(Luckock { k_cdf: k_cdf.clone(), l_cdf: l_cdf.clone() })
        }
        Preset::Stigler => {
            let cdf: Vec<f64> = (0..=n).map(|x| x as f64 / n as f64).collect();
            Arc::new(Luckock { k_cdf: cdf.clone(), l_cdf: cdf })
        }
    };
    let spec = IntensitySpec::new(model, n);
    spec.validate(grid)?;
    Ok(spec)
}

fn check_cdf(cdf: &[f64], n: usize, name: &str) -> Result<()> {
    if cdf.len() != n + 1 {
        return Err(LobError::InvalidIntensity(format!("{name} must be given at x = 0..={n}")));
    }
    if cdf.windows(2).any(|w| w[1] < w[0]) {
        return Err(LobError::InvalidIntensity(format!("{name} is not monotone")));
    }
    if cdf.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(LobError::InvalidIntensity(format!("{name} leaves [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smith_row() {
        let g = TickGrid::unit(6).unwrap();
        let s = preset(&Preset::Smith { theta: 1.0, kappa: 0.5, rho: 0.2 }, &g).unwrap();
        for a in 2..=7 {
            for b in 0..a.min(6) {
                assert_eq!(s.model.theta(a, b), 1.0);
                assert_eq!(s.model.vartheta(a, b), 1.0);
                for p in 1..=6 {
                    assert_eq!(s.model.kappa(a, b, p), 0.5);
                    assert_eq!(s.model.lambda(a, b, p), 0.5);
                    assert_eq!(s.model.rho(a, b, p), 0.2);
                    assert_eq!(s.model.sigma(a, b, p), 0.2);
                }
            }
        }
        assert!(s.validate(&g).unwrap().ergodic);
    }

    #[test]
    fn luckock_has_no_cancellations() {
        let g = TickGrid::unit(4).unwrap();
        let k = vec![0.0, 0.1, 0.5, 0.9, 1.0];
        let s = preset(&Preset::Luckock { k_cdf: k.clone(), l_cdf: k }, &g).unwrap();
        assert_eq!(s.model.rho(3, 1, 4), 0.0);
        assert_eq!(s.model.sigma(3, 1, 1), 0.0);
        assert!(!s.validate(&g).unwrap().ergodic);
        assert!((s.model.kappa(3, 1, 3) - 0.4).abs() < 1e-15);
        assert!((s.model.theta(3, 2) - 0.5).abs() < 1e-15);
        assert!((s.model.vartheta(3, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn luckock_rejects_non_monotone() {
        let g = TickGrid::unit(4).unwrap();
        let bad = vec![0.0, 0.5, 0.4, 0.9, 1.0];
        let good = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        assert!(preset(&Preset::Luckock { k_cdf: bad, l_cdf: good.clone() }, &g).is_err());
        assert!(preset(&Preset::Luckock { k_cdf: good.clone(), l_cdf: good[..3].to_vec() }, &g).is_err());
    }

    #[test]
    fn stigler_is_uniform() {
        let g = TickGrid::unit(4).unwrap();
        let s = preset(&Preset::Stigler, &g).unwrap();
        for p in 1..=4 {
            assert!((s.model.kappa(5, 0, p) - 0.25).abs() < 1e-15);
            assert!((s.model.lambda(5, 0, p) - 0.25).abs() < 1e-15);
            assert_eq!(s.model.rho(5, 0, p), 0.0);
        }
    }

    #[derive(Debug)]
    struct Negative;
    impl IntensityModel for Negative {
        fn theta(&self, _: Tick, _: Tick) -> f64 {
            1.0
        }
        fn vartheta(&self, _: Tick, _: Tick) -> f64 {
            1.0
        }
        fn kappa(&self, a: Tick, _: Tick, p: Tick) -> f64 {
            if a == 3 && p == 4 {
                -1e-9
            } else {
                1.0
            }
        }
        fn lambda(&self, _: Tick, _: Tick, _: Tick) -> f64 {
            1.0
        }
        fn rho(&self, _: Tick, _: Tick, _: Tick) -> f64 {
            1.0
        }
        fn sigma(&self, _: Tick, _: Tick, _: Tick) -> f64 {
            1.0
        }
    }

    #[test]
    fn validation_finds_single_negative_rate() {
        let g = TickGrid::unit(5).unwrap();
        let spec = IntensitySpec::new(Arc::new(Negative), 5);
        let err = spec.validate(&g).unwrap_err();
        assert!(matches!(err, LobError::InvalidIntensity(_)), "{err}");
    }

    #[test]
    fn distance_intensity_matches_smith_for_basic() {
        let d = DistanceIntensity {
            params: ModelParams::basic(0.5, 0.3),
            theta: 1.0,
            kappa_spread: 0.5,
            rho_quote: 0.3,
        };
        let s = Smith { theta: 1.0, kappa: 0.5, rho: 0.3 };
        for (a, b, p) in [(5, 2, 7), (5, 2, 3), (5, 2, 5), (5, 2, 1), (5, 2, 2)] {
            assert_eq!(d.kappa(a, b, p), s.kappa(a, b, p));
            assert_eq!(d.lambda(a, b, p), s.lambda(a, b, p));
            assert_eq!(d.rho(a, b, p), s.rho(a, b, p));
            assert_eq!(d.sigma(a, b, p), s.sigma(a, b, p));
        }
    }
}
