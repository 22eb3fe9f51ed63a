//! Binomial-plus-Poisson laws, evaluated in log space.

use statrs::function::factorial::{ln_binomial, ln_factorial};

/// `ln(sum(exp(x)))` over the iterator; `-inf` when empty.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln P[Po(mu) = k]`.
pub fn ln_poisson_pmf(mu: f64, k: u64) -> f64 {
    if mu <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

/// `ln P[Bi(nu, p) = k]`.
pub fn ln_binomial_pmf(nu: u64, p: f64, k: u64) -> f64 {
    if k > nu {
        return f64::NEG_INFINITY;
    }
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if k == nu { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial(nu, k) + k as f64 * p.ln() + (nu - k) as f64 * (-p).ln_1p()
}

/// `ln P[Bi(nu, varpi) + Po(mu) = q]` with independent summands.
pub fn ln_bipo_pmf(nu: u64, varpi: f64, mu: f64, q: u64) -> f64 {
    let (lo, hi) = if varpi <= 0.0 {
        (0, 0)
    } else if varpi >= 1.0 {
        (nu, nu)
    } else {
        (0, nu.min(q))
    };
    let (lo, hi) = if mu <= 0.0 { (lo.max(q), hi.min(q)) } else { (lo, hi.min(q)) };
    if lo > hi {
        return f64::NEG_INFINITY;
    }
    log_sum_exp((lo..=hi).map(|k| ln_binomial_pmf(nu, varpi, k) + ln_poisson_pmf(mu, q - k)))
}

/// `P[Bi(nu, varpi) + Po(mu) = q]`.
pub fn bipo_pmf(nu: u64, varpi: f64, mu: f64, q: u64) -> f64 {
    ln_bipo_pmf(nu, varpi, mu, q).exp()
}

/// Log pmf of `Bi(nu, varpi) + Po(mu)` on `0..len`.
pub fn ln_bipo_pmf_vec(nu: u64, varpi: f64, mu: f64, len: usize) -> Vec<f64> {
    (0..len as u64).map(|q| ln_bipo_pmf(nu, varpi, mu, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Binomial, Distribution, Poisson};

    #[test]
    fn degenerate_cases() {
        assert_eq!(bipo_pmf(0, 0.3, 0.0, 0), 1.0);
        assert_eq!(bipo_pmf(0, 0.3, 0.0, 1), 0.0);
        for nu in 0..6 {
            assert!((bipo_pmf(nu, 1.0, 0.0, nu) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_convolution() {
        // P[Bi(2,1/2)=0] P[Po(1)=0] = 1/4 e^{-1}
        let expected = 0.25 * (-1.0f64).exp();
        assert!((bipo_pmf(2, 0.5, 1.0, 0) - expected).abs() < 1e-15);
        assert!((bipo_pmf(2, 0.5, 1.0, 0) - 0.0919699).abs() < 1e-7);
        // q = 1: P[B=0]P[P=1] + P[B=1]P[P=0] = 1/4 e^{-1} + 1/2 e^{-1}
        assert!((bipo_pmf(2, 0.5, 1.0, 1) - 0.75 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sums_to_one() {
        let mut rng = crate::rng::path_rng(5, 0);
        for _ in 0..200 {
            let nu = rng.gen_range(0..30u64);
            let w: f64 = rng.gen();
            let mu = rng.gen_range(0.0..20.0);
            let total: f64 = (0..200).map(|q| bipo_pmf(nu, w, mu, q)).sum();
            assert!((total - 1.0).abs() < 1e-10, "nu={nu} w={w} mu={mu}: {total}");
        }
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        let l = ln_bipo_pmf(50, 0.3, 1e4, 100_000);
        assert!(l.is_finite() && l < 0.0);
        let l = ln_bipo_pmf(3, 0.5, 1e4, 10_000);
        assert!(l.is_finite());
        assert!(ln_poisson_pmf(1e4, 100_000).is_finite());
    }

    #[test]
    fn matches_monte_carlo() {
        let mut rng = crate::rng::path_rng(6, 0);
        for _ in 0..20 {
            let nu = rng.gen_range(0..15u64);
            let w: f64 = rng.gen_range(0.05..0.95);
            let mu: f64 = rng.gen_range(0.1..6.0);
            let draws = 300_000;
            let bin = Binomial::new(nu, w).unwrap();
            let po = Poisson::new(mu).unwrap();
            let mut hist = vec![0u64; 64];
            for _ in 0..draws {
                let x = bin.sample(&mut rng) + po.sample(&mut rng) as u64;
                hist[(x as usize).min(63)] += 1;
            }
            let tv: f64 = 0.5
                * hist
                    .iter()
                    .enumerate()
                    .map(|(q, &c)| (c as f64 / draws as f64 - bipo_pmf(nu, w, mu, q as u64)).abs())
                    .sum::<f64>();
            assert!(tv < 0.01, "tv {tv} for nu={nu} w={w} mu={mu}");
        }
    }
}
