//! Wilcoxon signed-rank test for paired scores.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest sample size for the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `w_plus - w_minus` for the differences `y - x`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
    pub median_x: f64,
    pub median_y: f64,
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Midranks of `v` (1-based) and whether any ties occurred.
fn midranks(v: &[f64]) -> (Vec<f64>, bool) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut ties = false;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        ties |= j > i;
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of sign patterns giving each rank sum `0..=n(n+1)/2`.
fn exact_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut c = vec![0.0; max + 1];
    c[0] = 1.0;
    for r in 1..=n {
        for w in (r..=max).rev() {
            c[w] += c[w - r];
        }
    }
    c
}

/// Two-sided signed-rank test of zero median difference `y - x`. Exact for
/// up to 25 pairs without tied magnitudes, normal approximation with tie
/// and continuity corrections otherwise.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> WilcoxonResult {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|(x, y)| y - x).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let mut res = WilcoxonResult {
        n,
        w_plus: 0.0,
        w_minus: 0.0,
        statistic: 0.0,
        p_value: 1.0,
        exact: true,
        median_x: median(&xs),
        median_y: median(&ys),
    };
    if n == 0 {
        tracing::warn!("all pairs tied; signed-rank p-value set to 1");
        return res;
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&mags);
    res.w_plus = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    res.w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - res.w_plus;
    res.statistic = res.w_plus - res.w_minus;
    if n <= EXACT_MAX_N && !ties {
        let counts = exact_counts(n);
        let total = 2f64.powi(n as i32);
        let w = res.w_plus.round() as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
        let upper: f64 = counts[w..].iter().sum::<f64>() / total;
        res.p_value = (2.0 * lower.min(upper)).min(1.0);
    } else {
        res.exact = false;
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let dev = ((res.w_plus - mean).abs() - 0.5).max(0.0);
        let z = if var > 0.0 { dev / var.sqrt() } else { 0.0 };
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        res.p_value = (2.0 * normal.sf(z)).min(1.0);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_scores() {
        let r = wilcoxon_signed_rank(&[(1.0, 1.0), (2.0, 2.0), (0.3, 0.3)]);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n, 0);
    }

    #[test]
    fn six_positive_differences() {
        let pairs: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let r = wilcoxon_signed_rank(&pairs);
        assert!(r.exact);
        assert_eq!(r.w_plus, 21.0);
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn swapping_negates_the_statistic() {
        let pairs = [(0.1, 0.4), (0.5, 0.2), (0.3, 0.9), (0.8, 0.85), (0.2, 0.6), (0.7, 0.1), (0.6, 1.0)];
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (y, x)).collect();
        let a = wilcoxon_signed_rank(&pairs);
        let b = wilcoxon_signed_rank(&swapped);
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn exact_null_counts() {
        // n = 3: sums 0..6 with counts 1,1,1,2,1,1,1
        assert_eq!(exact_counts(3), vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0]);
        assert_eq!(exact_counts(10).iter().sum::<f64>(), 1024.0);
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let pairs: Vec<(f64, f64)> = (0..40).map(|i| (0.0, if i % 3 == 0 { -1.0 } else { 1.0 } * (i + 1) as f64)).collect();
        let r = wilcoxon_signed_rank(&pairs);
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }
}
