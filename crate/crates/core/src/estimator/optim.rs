//! Quasi-Newton maximization with finite-difference derivatives, and a
//! Nelder-Mead fallback for when the line search stalls.
//!
//! Stencil points of one gradient or Hessian are evaluated in parallel.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptBudget {
    pub max_iter: usize,
    /// Wall-clock limit in seconds; `None` for no limit.
    pub time_limit_secs: Option<f64>,
    /// Sup-norm of the gradient (unconstrained space) accepted as converged.
    pub grad_tol: f64,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self { max_iter: 500, time_limit_secs: Some(2_500.0), grad_tol: 1e-3 }
    }
}

impl OptBudget {
    pub fn unlimited() -> Self {
        Self { time_limit_secs: None, ..Self::default() }
    }

    pub fn is_zero(&self) -> bool {
        self.time_limit_secs == Some(0.0) || self.max_iter == 0
    }

    pub(crate) fn deadline(&self, start: Instant) -> Option<Instant> {
        self.time_limit_secs.map(|s| start + Duration::from_secs_f64(s.max(0.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub timed_out: bool,
    /// The Nelder-Mead fallback was used.
    pub fallback: bool,
}

/// Central-difference step for a coordinate at `x`.
pub fn fd_step(x: f64) -> f64 {
    (1e-7 * x.abs()).max(1e-5)
}

/// Central differences with steps from [`fd_step`].
pub fn central_gradient<F>(f: &F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h: Vec<f64> = x.iter().map(|&v| fd_step(v)).collect();
    stencil_gradient(f, x, &h, &[(1.0, 1.0)], 2.0)
}

/// Fourth-order five-point stencil with steps `h` per coordinate; an
/// independent check on [`central_gradient`].
pub fn five_point_gradient<F>(f: &F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h: Vec<f64> = x.iter().map(|&v| h * v.abs().max(1.0)).collect();
    stencil_gradient(f, x, &h, &[(8.0, 1.0), (-1.0, 2.0)], 12.0)
}

/// `g_i = sum_k w_k (f(x + m_k h_i e_i) - f(x - m_k h_i e_i)) / (denom h_i)`.
fn stencil_gradient<F>(f: &F, x: &[f64], h: &[f64], weights: &[(f64, f64)], denom: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let k = x.len();
    let per = 2 * weights.len();
    let values = par::map_range(k * per, |j| {
        let (i, r) = (j / per, j % per);
        let (_, m) = weights[r / 2];
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let mut p = x.to_vec();
        p[i] += sign * m * h[i];
        f(&p)
    });
    (0..k)
        .map(|i| {
            let v = &values[i * per..(i + 1) * per];
            let num: f64 = weights.iter().enumerate().map(|(r, (w, _))| w * (v[2 * r] - v[2 * r + 1])).sum();
            num / (denom * h[i])
        })
        .collect()
}

/// Symmetric finite-difference Hessian with steps `1e-4 max(1, |x_i|)`.
pub fn fd_hessian<F>(f: &F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let k = x.len();
    let h: Vec<f64> = x.iter().map(|&v| 1e-4 * v.abs().max(1.0)).collect();
    let mut probes: Vec<Vec<(usize, f64)>> = vec![vec![]];
    for i in 0..k {
        probes.push(vec![(i, h[i])]);
        probes.push(vec![(i, -h[i])]);
    }
    for i in 0..k {
        for j in i + 1..k {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                probes.push(vec![(i, si * h[i]), (j, sj * h[j])]);
            }
        }
    }
    let values = par::map_collect(&probes, |shifts| {
        let mut p = x.to_vec();
        for &(i, d) in shifts {
            p[i] += d;
        }
        f(&p)
    });
    let f0 = values[0];
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        hess[(i, i)] = (values[1 + 2 * i] - 2.0 * f0 + values[2 + 2 * i]) / (h[i] * h[i]);
    }
    let mut idx = 1 + 2 * k;
    for i in 0..k {
        for j in i + 1..k {
            let v = &values[idx..idx + 4];
            let hij = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = hij;
            hess[(j, i)] = hij;
            idx += 4;
        }
    }
    hess
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest sup-norm of a single step in the unconstrained space.
const MAX_STEP: f64 = 2.0;

/// Maximizes `f` from `x0` by BFGS with Armijo backtracking. Non-finite
/// values count as infeasible. When the line search fails along both the
/// quasi-Newton and the gradient direction, Nelder-Mead takes over from the
/// current point. The returned point is never worse than `x0`.
pub fn maximize<F>(f: &F, x0: &[f64], budget: &OptBudget) -> OptOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let start = Instant::now();
    let deadline = budget.deadline(start);
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    let k = x0.len();
    // minimize g = -f
    let g = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evals = 1;
    let mut x = x0.to_vec();
    let mut gx = g(&x);
    let mut out = OptOutcome {
        x: x.clone(),
        f: -gx,
        iterations: 0,
        evaluations: evals,
        converged: false,
        timed_out: false,
        fallback: false,
    };
    if budget.is_zero() {
        out.timed_out = budget.time_limit_secs == Some(0.0);
        return out;
    }
    if !gx.is_finite() {
        // no usable starting point for derivatives: go straight to the simplex
        let nm = nelder_mead(&g, &x, 200 * (k + 1), deadline);
        out.x = nm.0;
        out.f = -nm.1;
        out.evaluations += nm.2;
        out.fallback = true;
        out.timed_out = expired();
        return out;
    }
    let mut grad = central_gradient(&g, &x);
    evals += 2 * k;
    let mut hinv = DMatrix::<f64>::identity(k, k);
    let mut fresh = true;
    let mut iter = 0;
    let mut converged = false;
    let mut stalled = false;
    while iter < budget.max_iter {
        if sup_norm(&grad) <= budget.grad_tol {
            converged = true;
            break;
        }
        if expired() {
            out.timed_out = true;
            break;
        }
        iter += 1;
        let gv = DVector::from_column_slice(&grad);
        let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(k, k);
            fresh = true;
            d = grad.iter().map(|v| -v).collect();
            slope = dot(&grad, &d);
        }
        let mut t = (MAX_STEP / sup_norm(&d)).min(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let gn = g(&xn);
            evals += 1;
            if gn.is_finite() && gn <= gx + 1e-4 * t * slope {
                accepted = Some((xn, gn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, gn)) = accepted else {
            if fresh {
                stalled = true;
                break;
            }
            hinv = DMatrix::identity(k, k);
            fresh = true;
            continue;
        };
        let gradn = central_gradient(&g, &xn);
        evals += 2 * k;
        let s = DVector::from_iterator(k, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(k, gradn.iter().zip(&grad).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(k, k);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
            fresh = false;
        }
        x = xn;
        gx = gn;
        grad = gradn;
    }
    if stalled && !expired() {
        let (xn, gn, e) = nelder_mead(&g, &x, 100 * (k + 1), deadline);
        evals += e;
        out.fallback = true;
        if gn < gx {
            x = xn;
            gx = gn;
        }
        grad = central_gradient(&g, &x);
        evals += 2 * k;
        converged = sup_norm(&grad) <= budget.grad_tol;
        out.timed_out = expired();
    }
    out.x = x;
    out.f = -gx;
    out.iterations = iter;
    out.evaluations = evals;
    out.converged = converged;
    out
}

/// Minimizes `g` with the Nelder-Mead simplex (standard coefficients).
/// Returns the best point, its value and the number of evaluations.
pub fn nelder_mead<G>(g: &G, x0: &[f64], max_evals: usize, deadline: Option<Instant>) -> (Vec<f64>, f64, usize)
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let k = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..k {
        let mut p = x0.to_vec();
        p[i] += 0.1 * x0[i].abs().max(1.0);
        simplex.push(p);
    }
    let mut vals: Vec<f64> = par::map_collect(&simplex, |p| g(p));
    let mut evals = k + 1;
    while evals < max_evals && !deadline.is_some_and(|d| Instant::now() >= d) {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[k] - vals[0]).abs() <= 1e-12 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> =
            (0..k).map(|j| simplex[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
        let along = |c: f64| -> Vec<f64> { (0..k).map(|j| centroid[j] + c * (simplex[k][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = g(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = g(&xe);
            evals += 1;
            if fe < fr {
                simplex[k] = xe;
                vals[k] = fe;
            } else {
                simplex[k] = xr;
                vals[k] = fr;
            }
        } else if fr < vals[k - 1] {
            simplex[k] = xr;
            vals[k] = fr;
        } else {
            let (xc, fc) = if fr < vals[k] {
                let xc = along(-0.5);
                let fc = g(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = g(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[k].min(fr) {
                simplex[k] = xc;
                vals[k] = fc;
            } else {
                let best = simplex[0].clone();
                for p in simplex.iter_mut().skip(1) {
                    for j in 0..k {
                        p[j] = best[j] + 0.5 * (p[j] - best[j]);
                    }
                }
                let shrunk = par::map_collect(&simplex[1..], |p| g(p));
                vals[1..].copy_from_slice(&shrunk);
                evals += k;
            }
        }
    }
    let best = (0..=k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty simplex");
    (simplex[best].clone(), vals[best], evals)
}
