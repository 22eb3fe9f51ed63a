use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};

/// In-book intensity family: the basic model `S` or a power-tail model `T1..T3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    S,
    T1,
    T2,
    T3,
}

impl Variant {
    pub const LADDER: [Variant; 4] = [Variant::S, Variant::T1, Variant::T2, Variant::T3];

    /// Number of explicitly parameterized distances (0 for `S`).
    pub fn tail_len(self) -> usize {
        match self {
            Variant::S => 0,
            Variant::T1 => 1,
            Variant::T2 => 2,
            Variant::T3 => 3,
        }
    }

    pub fn levels(self) -> usize {
        self.tail_len().max(1)
    }

    /// Parameter count of the ZI model (add one for `eta` in GZI).
    pub fn n_params(self) -> usize {
        match self {
            Variant::S => 2,
            v => 2 * v.tail_len() + 2,
        }
    }

    pub fn next(self) -> Option<Variant> {
        match self {
            Variant::S => Some(Variant::T1),
            Variant::T1 => Some(Variant::T2),
            Variant::T2 => Some(Variant::T3),
            Variant::T3 => None,
        }
    }

    pub fn rank(self) -> usize {
        self.tail_len()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::S => "S",
            Variant::T1 => "T1",
            Variant::T2 => "T2",
            Variant::T3 => "T3",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = LobError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Variant::S),
            "T1" => Ok(Variant::T1),
            "T2" => Ok(Variant::T2),
            "T3" => Ok(Variant::T3),
            other => Err(LobError::InvalidParams(format!("unknown variant {other:?}"))),
        }
    }
}

/// Rates of limit-order arrival and per-order cancellation as functions of
/// the distance `d >= 1` between a tick and the prevailing ask.
pub trait DistanceRates: Sync {
    fn kappa(&self, d: usize) -> f64;
    fn rho(&self, d: usize) -> f64;
}

/// Parameters of the in-book intensities, plus the GZI survival probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    pub kappa_levels: Vec<f64>,
    pub rho_levels: Vec<f64>,
    pub alpha_kappa: Option<f64>,
    pub alpha_rho: Option<f64>,
    pub eta: Option<f64>,
}

/// Map between natural parameters and the unconstrained optimization space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ParamMap {
    /// `ln` for levels, identity for exponents, logit for `eta`.
    #[default]
    Log,
    /// Inverse softplus for levels, identity for exponents, logit for `eta`.
    Softplus,
}

impl ModelParams {
    pub fn basic(kappa0: f64, rho0: f64) -> Self {
        Self {
            variant: Variant::S,
            kappa_levels: vec![kappa0],
            rho_levels: vec![rho0],
            alpha_kappa: None,
            alpha_rho: None,
            eta: None,
        }
    }

    pub fn tail(
        variant: Variant,
        kappa_levels: Vec<f64>,
        rho_levels: Vec<f64>,
        alpha_kappa: f64,
        alpha_rho: f64,
    ) -> Result<Self> {
        let p = Self {
            variant,
            kappa_levels,
            rho_levels,
            alpha_kappa: Some(alpha_kappa),
            alpha_rho: Some(alpha_rho),
            eta: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn eta_or_one(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.variant.levels();
        if self.kappa_levels.len() != k || self.rho_levels.len() != k {
            return Err(LobError::InvalidParams(format!(
                "{} needs {k} kappa and {k} rho levels",
                self.variant
            )));
        }
        if let Some(bad) =
            self.kappa_levels.iter().chain(&self.rho_levels).find(|x| !(x.is_finite() && **x > 0.0))
        {
            return Err(LobError::InvalidParams(format!("levels must be positive, got {bad}")));
        }
        let tails = self.alpha_kappa.is_some() && self.alpha_rho.is_some();
        match self.variant {
            Variant::S if self.alpha_kappa.is_some() || self.alpha_rho.is_some() => {
                return Err(LobError::InvalidParams("S has no tail exponents".into()))
            }
            Variant::S => {}
            _ if !tails => {
                return Err(LobError::InvalidParams(format!("{} needs both exponents", self.variant)))
            }
            _ => {}
        }
        if [self.alpha_kappa, self.alpha_rho].iter().flatten().any(|a| !a.is_finite()) {
            return Err(LobError::InvalidParams("exponents must be finite".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(LobError::InvalidParams(format!("eta must lie in (0,1], got {eta}")));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.variant.n_params() + usize::from(self.eta.is_some())
    }

    /// `(kappa~(i), rho~(i))` at distance `i >= 1` from the ask.
    pub fn distance_intensity(&self, i: i64) -> Result<(f64, f64)> {
        if i < 1 {
            return Err(LobError::Domain(format!("distance must be >= 1, got {i}")));
        }
        let i = i as usize;
        Ok((self.kappa_at(i), self.rho_at(i)))
    }

    fn level_at(&self, levels: &[f64], alpha: Option<f64>, i: usize) -> f64 {
        let m = self.variant.tail_len();
        if m == 0 {
            return levels[0];
        }
        if i <= m {
            levels[i - 1]
        } else {
            levels[m - 1] * ((i - m) as f64).powf(alpha.unwrap_or(0.0))
        }
    }

    pub fn kappa_at(&self, i: usize) -> f64 {
        self.level_at(&self.kappa_levels, self.alpha_kappa, i)
    }

    pub fn rho_at(&self, i: usize) -> f64 {
        self.level_at(&self.rho_levels, self.alpha_rho, i)
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.kappa_levels.len()).map(|i| format!("kappa_{i}")).collect();
        names.extend((0..self.rho_levels.len()).map(|i| format!("rho_{i}")));
        if self.alpha_kappa.is_some() {
            names.push("alpha_kappa".into());
            names.push("alpha_rho".into());
        }
        if self.eta.is_some() {
            names.push("eta".into());
        }
        names
    }

    /// Natural parameter vector in the order given by [`ModelParams::names`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.kappa_levels.clone();
        v.extend(&self.rho_levels);
        v.extend(self.alpha_kappa);
        v.extend(self.alpha_rho);
        v.extend(self.eta);
        v
    }

    pub fn to_unconstrained(&self, map: ParamMap) -> Vec<f64> {
        let mut u: Vec<f64> =
            self.kappa_levels.iter().chain(&self.rho_levels).map(|&x| map.level_to_free(x)).collect();
        u.extend(self.alpha_kappa);
        u.extend(self.alpha_rho);
        if let Some(eta) = self.eta {
            u.push(logit(eta));
        }
        u
    }

    /// Inverse of [`ModelParams::to_unconstrained`]; `with_eta` says whether
    /// the last coordinate is the logit of `eta`.
    pub fn from_unconstrained(variant: Variant, with_eta: bool, map: ParamMap, u: &[f64]) -> Result<Self> {
        let k = variant.levels();
        let expected = variant.n_params() + usize::from(with_eta);
        if u.len() != expected {
            return Err(LobError::InvalidParams(format!("expected {expected} coordinates, got {}", u.len())));
        }
        let kappa_levels = u[..k].iter().map(|&x| map.free_to_level(x)).collect();
        let rho_levels = u[k..2 * k].iter().map(|&x| map.free_to_level(x)).collect();
        let mut idx = 2 * k;
        let (alpha_kappa, alpha_rho) = if variant == Variant::S {
            (None, None)
        } else {
            idx += 2;
            (Some(u[2 * k]), Some(u[2 * k + 1]))
        };
        let eta = with_eta.then(|| logistic(u[idx]));
        let p = Self { variant, kappa_levels, rho_levels, alpha_kappa, alpha_rho, eta };
        p.validate()?;
        Ok(p)
    }

    /// Diagonal Jacobian `d natural / d free` at this point.
    pub fn free_jacobian(&self, map: ParamMap) -> Vec<f64> {
        let mut j: Vec<f64> =
            self.kappa_levels.iter().chain(&self.rho_levels).map(|&x| map.level_derivative(x)).collect();
        if self.alpha_kappa.is_some() {
            j.push(1.0);
            j.push(1.0);
        }
        if let Some(eta) = self.eta {
            j.push(eta * (1.0 - eta));
        }
        j
    }

    /// Extends to the next ladder variant: levels are repeated and exponents
    /// start at `-1`.
    pub fn extend_to(&self, variant: Variant) -> Self {
        let k = variant.levels();
        let pad = |levels: &[f64]| {
            let mut v = levels.to_vec();
            let last = *v.last().expect("levels are nonempty");
            v.resize(k, last);
            v
        };
        let (ak, ar) = if variant == Variant::S {
            (None, None)
        } else {
            (Some(self.alpha_kappa.unwrap_or(-1.0)), Some(self.alpha_rho.unwrap_or(-1.0)))
        };
        Self {
            variant,
            kappa_levels: pad(&self.kappa_levels),
            rho_levels: pad(&self.rho_levels),
            alpha_kappa: ak,
            alpha_rho: ar,
            eta: self.eta,
        }
    }
}

impl DistanceRates for ModelParams {
    fn kappa(&self, d: usize) -> f64 {
        self.kappa_at(d)
    }

    fn rho(&self, d: usize) -> f64 {
        self.rho_at(d)
    }
}

impl ParamMap {
    fn level_to_free(self, x: f64) -> f64 {
        match self {
            ParamMap::Log => x.ln(),
            // inverse softplus: ln(e^x - 1)
            ParamMap::Softplus => x + (-(-x).exp_m1()).ln(),
        }
    }

    fn free_to_level(self, u: f64) -> f64 {
        match self {
            ParamMap::Log => u.exp(),
            ParamMap::Softplus => {
                if u > 30.0 {
                    u + (-u).exp().ln_1p()
                } else {
                    u.exp().ln_1p()
                }
            }
        }
    }

    fn level_derivative(self, x: f64) -> f64 {
        match self {
            ParamMap::Log => x,
            // d softplus(u)/du = 1 - e^{-x}
            ParamMap::Softplus => -(-x).exp_m1(),
        }
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_is_constant() {
        let p = ModelParams::basic(0.5, 1.0);
        assert_eq!(p.distance_intensity(7).unwrap(), (0.5, 1.0));
        assert!(p.distance_intensity(0).is_err());
        assert!(p.distance_intensity(-3).is_err());
    }

    #[test]
    fn t1_power_tail() {
        let p = ModelParams::tail(Variant::T1, vec![2.0], vec![3.0], -1.0, -2.0).unwrap();
        assert_eq!(p.distance_intensity(1).unwrap(), (2.0, 3.0));
        let (k3, r3) = p.distance_intensity(3).unwrap();
        assert!((k3 - 1.0).abs() < 1e-15);
        assert!((r3 - 3.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn splice_is_continuous() {
        for v in [Variant::T1, Variant::T2, Variant::T3] {
            let m = v.tail_len();
            let levels: Vec<f64> = (0..m).map(|i| 1.0 + i as f64).collect();
            let p = ModelParams::tail(v, levels.clone(), levels.clone(), -2.3, 0.7).unwrap();
            assert_eq!(p.kappa_at(m + 1), levels[m - 1]);
            assert_eq!(p.rho_at(m + 1), levels[m - 1]);
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(Variant::S.n_params(), 2);
        assert_eq!(Variant::T1.n_params(), 4);
        assert_eq!(Variant::T2.n_params(), 6);
        assert_eq!(Variant::T3.n_params(), 8);
        assert_eq!(ModelParams::basic(1.0, 1.0).with_eta(0.5).n_params(), 3);
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(ModelParams::basic(-1.0, 1.0).validate().is_err());
        assert!(ModelParams::basic(1.0, 1.0).with_eta(1.5).validate().is_err());
        assert!(ModelParams::tail(Variant::T2, vec![1.0], vec![1.0, 1.0], 0.0, 0.0).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            0usize..4,
            proptest::collection::vec(1e-3f64..1e3, 3),
            proptest::collection::vec(1e-3f64..1e3, 3),
            -5.0f64..5.0,
            -5.0f64..5.0,
            proptest::option::of(0.01f64..0.99),
        )
            .prop_map(|(v, k, r, ak, ar, eta)| {
                let variant = Variant::LADDER[v];
                let m = variant.levels();
                let mut p = if variant == Variant::S {
                    ModelParams::basic(k[0], r[0])
                } else {
                    ModelParams::tail(variant, k[..m].to_vec(), r[..m].to_vec(), ak, ar).unwrap()
                };
                p.eta = eta;
                p
            })
    }

    proptest! {
        #[test]
        fn unconstrained_round_trip(p in arb_params(), soft in any::<bool>()) {
            let map = if soft { ParamMap::Softplus } else { ParamMap::Log };
            let u = p.to_unconstrained(map);
            let back = ModelParams::from_unconstrained(p.variant, p.eta.is_some(), map, &u).unwrap();
            for (a, b) in p.to_vec().iter().zip(back.to_vec()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
            }
        }
    }
}
