use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::likelihood::log_likelihood;
use super::optim::{fd_hessian, maximize, OptBudget};
use super::sample::{Mode, Sample};
use crate::error::{LobError, Result};
use crate::model::{ModelParams, ParamMap, Variant};

/// Unconstrained level coordinates beyond this are reported as boundary fits.
const BOUNDARY_LEVEL: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub map: ParamMap,
    /// GZI only: hold `eta` at this value instead of estimating it.
    pub fix_eta: Option<f64>,
    pub budget: OptBudget,
    /// Level of the Wald and likelihood-ratio tests.
    pub significance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { map: ParamMap::Log, fix_eta: None, budget: OptBudget::default(), significance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: Variant,
    pub mode: Mode,
    pub params: ModelParams,
    pub names: Vec<String>,
    pub log_lik: f64,
    /// Absent when the observed information is not positive definite.
    pub std_errors: Option<Vec<f64>>,
    /// Two-sided Wald p-values for a zero parameter.
    pub param_pvalues: Option<Vec<f64>>,
    pub converged: bool,
    pub timed_out: bool,
    /// Some level parameter ran off towards 0 or infinity, or the
    /// information is singular.
    pub boundary: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub n_obs: usize,
    pub wall_time: f64,
}

impl FitResult {
    /// Parameter count entering likelihood-ratio degrees of freedom.
    pub fn n_free(&self) -> usize {
        self.names.len()
    }

    pub fn all_significant(&self, level: f64) -> bool {
        self.param_pvalues.as_ref().is_some_and(|p| p.iter().all(|&x| x < level))
    }
}

/// Moment-based start for `S`: if the book beyond the ask were stationary,
/// a tick would be empty with probability `exp(-kappa/rho)`, so the mean
/// jump magnitude `m` gives `kappa/rho = -ln(1 - 1/m)`; `rho` is taken as
/// the reciprocal of the mean time between ask moves.
pub fn initial_guess(sample: &Sample) -> ModelParams {
    let jumps = sample.jumps(false);
    let m = if jumps.is_empty() { 2.0 } else { jumps.iter().sum::<usize>() as f64 / jumps.len() as f64 };
    let ratio = -(1.0 - 1.0 / m.max(1.05)).ln();
    let (mut time, mut moves) = (0.0, 0usize);
    for s in &sample.sessions {
        for step in &s.steps {
            time += step.dt;
            moves += 1;
        }
    }
    let rho = if moves > 0 && time > 0.0 { (moves as f64 / time).clamp(1e-3, 1e3) } else { 1.0 };
    ModelParams::basic(ratio * rho, rho)
}

struct Objective<'a> {
    sample: &'a Sample,
    variant: Variant,
    mode: Mode,
    map: ParamMap,
    free_eta: bool,
    fixed_eta: Option<f64>,
}

impl Objective<'_> {
    fn params(&self, u: &[f64]) -> Result<ModelParams> {
        let mut p = ModelParams::from_unconstrained(self.variant, self.free_eta, self.map, u)?;
        if let Some(e) = self.fixed_eta {
            p.eta = Some(e);
        }
        Ok(p)
    }

    fn value(&self, u: &[f64]) -> f64 {
        match self.params(u).and_then(|p| log_likelihood(self.sample, &p, self.mode)) {
            Ok(v) => v,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn start(&self, init: &ModelParams) -> Vec<f64> {
        let mut p = init.clone();
        p.eta = None;
        let mut u = p.to_unconstrained(self.map);
        if self.free_eta {
            u.push(crate::model::logit(init.eta.unwrap_or(0.9).clamp(1e-6, 1.0 - 1e-6)));
        }
        u
    }
}

/// Maximum-likelihood fit of one variant.
pub fn fit(
    sample: &Sample,
    variant: Variant,
    mode: Mode,
    init: Option<&ModelParams>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if sample.is_empty() {
        return Err(LobError::InsufficientData("the in-sample segment is empty".into()));
    }
    let started = Instant::now();
    let (free_eta, fixed_eta) = match (mode, opts.fix_eta) {
        (Mode::Zi, _) => (false, None),
        (Mode::Gzi, Some(e)) => (false, Some(e)),
        (Mode::Gzi, None) => (true, None),
    };
    let mut init = init.cloned().unwrap_or_else(|| initial_guess(sample));
    if init.variant != variant {
        init = init.extend_to(variant);
    }
    init.validate()?;
    let obj = Objective { sample, variant, mode, map: opts.map, free_eta, fixed_eta };
    let u0 = obj.start(&init);
    let f = |u: &[f64]| obj.value(u);
    let out = maximize(&f, &u0, &opts.budget);
    let params = obj.params(&out.x)?;
    let mut boundary = out.x[..2 * variant.levels()].iter().any(|u| u.abs() > BOUNDARY_LEVEL);
    let (std_errors, param_pvalues) = if out.timed_out || !out.f.is_finite() {
        (None, None)
    } else {
        match standard_errors(&f, &out.x, &free_params(&params, free_eta), opts.map) {
            Some(se) => {
                let pv = wald_pvalues(&free_params(&params, free_eta).to_vec(), &se);
                (Some(se), Some(pv))
            }
            None => {
                boundary = true;
                (None, None)
            }
        }
    };
    let names = free_params(&params, free_eta).names();
    Ok(FitResult {
        variant,
        mode,
        params,
        names,
        log_lik: out.f,
        std_errors,
        param_pvalues,
        converged: out.converged,
        timed_out: out.timed_out,
        boundary,
        iterations: out.iterations,
        evaluations: out.evaluations,
        n_obs: sample.n_in,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// The parameters that were optimized (a fixed `eta` is dropped).
fn free_params(p: &ModelParams, free_eta: bool) -> ModelParams {
    let mut q = p.clone();
    if !free_eta {
        q.eta = None;
    }
    q
}

/// Observed information `-d^2 f / du^2` of an arbitrary objective at `u`,
/// symmetrized.
pub fn information_matrix<F>(f: &F, u: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h = -fd_hessian(f, u);
    (&h + h.transpose()) * 0.5
}

/// Standard errors on the natural scale: `J_i sqrt([I_u^{-1}]_ii)` with the
/// diagonal Jacobian `J = d natural / d free` (exact at a stationary point).
fn standard_errors<F>(f: &F, u: &[f64], params: &ModelParams, map: ParamMap) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let info = information_matrix(f, u);
    if info.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = info.cholesky()?;
    let cov = chol.inverse();
    let jac = params.free_jacobian(map);
    let se: Vec<f64> = (0..u.len()).map(|i| jac[i].abs() * cov[(i, i)].sqrt()).collect();
    se.iter().all(|s| s.is_finite() && *s > 0.0).then_some(se)
}

fn wald_pvalues(theta: &[f64], se: &[f64]) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    theta.iter().zip(se).map(|(t, s)| 2.0 * normal.sf((t / s).abs())).collect()
}

/// Observed information of the log-likelihood on the natural scale,
/// `J^{-1} I_u J^{-1}`, at `params` (meant for an optimum).
pub fn observed_information(sample: &Sample, params: &ModelParams, mode: Mode, map: ParamMap) -> Result<DMatrix<f64>> {
    params.validate()?;
    let free_eta = mode == Mode::Gzi && params.eta.is_some();
    let obj = Objective { sample, variant: params.variant, mode, map, free_eta, fixed_eta: None };
    let u = obj.start(params);
    let info = information_matrix(&|x: &[f64]| obj.value(x), &u);
    let jac = free_params(params, free_eta).free_jacobian(map);
    let k = u.len();
    Ok(DMatrix::from_fn(k, k, |i, j| info[(i, j)] / (jac[i] * jac[j])))
}

/// Likelihood-ratio p-value of `small` against `big` with `df` degrees of
/// freedom. A negative statistic (optimizer noise) is clipped to zero.
pub fn lr_test(small: &FitResult, big: &FitResult, df: usize) -> Result<f64> {
    if big.variant.rank() <= small.variant.rank() || small.mode != big.mode || df == 0 {
        return Err(LobError::NotNested(format!("{} vs {} with df {df}", small.variant, big.variant)));
    }
    let mut stat = 2.0 * (big.log_lik - small.log_lik);
    if stat < 0.0 {
        tracing::warn!(stat, "negative likelihood-ratio statistic clipped to zero");
        stat = 0.0;
    }
    let chi = ChiSquared::new(df as f64).map_err(|e| LobError::Domain(e.to_string()))?;
    Ok(chi.sf(stat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LrInsignificant,
    Timeout,
    AllTried,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub variant: Variant,
    pub fit: FitResult,
    /// LR p-value against the next fitted variant.
    pub lr_pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: Option<Variant>,
    pub ladder: Vec<LadderEntry>,
    pub stopped_reason: StopReason,
    /// Cap of the reduced sample used after a global timeout.
    pub retried_with: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Per-variant options; the time limit applies to each fit.
    pub fit: FitOptions,
    /// Wall-clock limit for the whole ladder in seconds.
    pub global_secs: Option<f64>,
    /// In-sample cap of the retry after a timeout with no completed fit.
    pub retry_cap: usize,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { fit: FitOptions::default(), global_secs: Some(2_500.0), retry_cap: 1_000 }
    }
}

/// Fits S, T1, T2, T3 in turn and stops at the first variant whose
/// parameters are all significant and whose LR test against the next
/// variant is insignificant.
pub fn select_model(sample: &Sample, mode: Mode, opts: &SelectOptions) -> Result<SelectionOutcome> {
    let first = run_ladder(sample, mode, opts)?;
    if first.stopped_reason == StopReason::Timeout
        && first.ladder.iter().all(|e| e.fit.timed_out)
        && !first.ladder.is_empty()
        && sample.n_in > opts.retry_cap
    {
        let reduced = sample.with_cap(opts.retry_cap);
        let mut second = run_ladder(&reduced, mode, opts)?;
        second.retried_with = Some(opts.retry_cap);
        return Ok(second);
    }
    Ok(first)
}

fn run_ladder(sample: &Sample, mode: Mode, opts: &SelectOptions) -> Result<SelectionOutcome> {
    let level = opts.fit.significance;
    let mut outcome =
        SelectionOutcome { chosen: None, ladder: Vec::new(), stopped_reason: StopReason::AllTried, retried_with: None };
    if opts.global_secs == Some(0.0) || opts.fit.budget.is_zero() {
        outcome.stopped_reason = StopReason::Timeout;
        return Ok(outcome);
    }
    let start = Instant::now();
    for variant in Variant::LADDER {
        let remaining = opts.global_secs.map(|g| g - start.elapsed().as_secs_f64());
        if remaining.is_some_and(|r| r <= 0.0) {
            outcome.stopped_reason = StopReason::Timeout;
            break;
        }
        let mut fo = opts.fit.clone();
        fo.budget.time_limit_secs = match (fo.budget.time_limit_secs, remaining) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let init = outcome.ladder.last().map(|e| e.fit.params.extend_to(variant));
        let f = fit(sample, variant, mode, init.as_ref(), &fo)?;
        let timed_out = f.timed_out;
        if let Some(prev) = outcome.ladder.last_mut() {
            if !timed_out {
                let df = f.n_free() - prev.fit.n_free();
                let p = lr_test(&prev.fit, &f, df)?;
                prev.lr_pvalue = Some(p);
                if prev.fit.all_significant(level) && p >= level {
                    outcome.chosen = Some(prev.variant);
                    outcome.stopped_reason = StopReason::LrInsignificant;
                    outcome.ladder.push(LadderEntry { variant, fit: f, lr_pvalue: None });
                    return Ok(outcome);
                }
            }
        }
        outcome.ladder.push(LadderEntry { variant, fit: f, lr_pvalue: None });
        if timed_out {
            outcome.stopped_reason = StopReason::Timeout;
            break;
        }
    }
    outcome.chosen = outcome
        .ladder
        .iter()
        .rev()
        .find(|e| !e.fit.timed_out && e.fit.all_significant(level))
        .map(|e| e.variant);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_fit(variant: Variant, ll: f64) -> FitResult {
        FitResult {
            variant,
            mode: Mode::Zi,
            params: ModelParams::basic(1.0, 1.0),
            names: vec![],
            log_lik: ll,
            std_errors: None,
            param_pvalues: None,
            converged: true,
            timed_out: false,
            boundary: false,
            iterations: 0,
            evaluations: 0,
            n_obs: 0,
            wall_time: 0.0,
        }
    }

    #[test]
    fn information_of_standard_quadratic() {
        let f = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let info = information_matrix(&f, &[0.3, -1.2, 2.0]);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((info[(i, j)] - e).abs() < 1e-6);
                assert_eq!(info[(i, j)], info[(j, i)]);
            }
        }
    }

    #[test]
    fn lr_pvalues() {
        let s = toy_fit(Variant::S, -100.0);
        assert_eq!(lr_test(&s, &toy_fit(Variant::T1, -100.0), 2).unwrap(), 1.0);
        let p = lr_test(&s, &toy_fit(Variant::T1, -100.0 + 5.99 / 2.0), 2).unwrap();
        assert!((p - 0.05).abs() < 1e-3, "{p}");
        // noise below the smaller fit is clipped
        assert_eq!(lr_test(&s, &toy_fit(Variant::T1, -100.5), 2).unwrap(), 1.0);
        assert!(lr_test(&toy_fit(Variant::T1, 0.0), &s, 2).is_err());
    }

    #[test]
    fn wald_two_sided() {
        let p = wald_pvalues(&[1.96, -1.96, 0.0], &[1.0, 1.0, 1.0]);
        assert!((p[0] - 0.05).abs() < 1e-3 && (p[1] - p[0]).abs() < 1e-15);
        assert_eq!(p[2], 1.0);
    }
}
