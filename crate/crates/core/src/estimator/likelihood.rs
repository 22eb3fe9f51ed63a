use crate::density::{ln_depletion_gzi, ln_depletion_zi, TickPosterior};
use crate::error::Result;
use crate::model::{ModelParams, Tick};
use crate::par;

use super::sample::{Mode, Obs, Sample, Session};

/// What an observation looks like from the visitor's side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsView {
    pub a_prev: Tick,
    pub q_prev: u32,
    pub new_a: Tick,
    pub new_q: u32,
    pub obs: Obs,
}

impl ObsView {
    pub fn magnitude(&self) -> usize {
        self.new_a - self.a_prev
    }
}

fn rate_tables(params: &ModelParams, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut kappa = vec![0.0; n + 1];
    let mut rho = vec![0.0; n + 1];
    for d in 1..=n {
        kappa[d] = params.kappa_at(d);
        rho[d] = params.rho_at(d);
    }
    (kappa, rho)
}

fn sweep_session<R>(
    session: &Session,
    n: usize,
    tables: &(Vec<f64>, Vec<f64>),
    eta: f64,
    visit: &(impl Fn(&TickPosterior, &ObsView) -> R + Sync),
) -> Vec<R> {
    let mut post = TickPosterior::new(n, session.a0, session.q0, &[]);
    let mut out = Vec::new();
    for step in &session.steps {
        post.observe_quote(step.q_before);
        post.elapse_tabulated(step.dt, &tables.0, &tables.1);
        if let Some(obs) = step.obs {
            let view = ObsView {
                a_prev: post.ask(),
                q_prev: step.q_before,
                new_a: step.new_a,
                new_q: step.new_q,
                obs,
            };
            out.push(visit(&post, &view));
        }
        post.transition(step.new_a, step.new_q, eta);
    }
    out
}

/// Re-sweeps the posterior under `params` and applies `visit` at every
/// tagged observation, with the posterior frozen just before the jump.
/// Results are in chronological order; sessions run in parallel.
pub fn map_observations<R: Send>(
    sample: &Sample,
    params: &ModelParams,
    mode: Mode,
    visit: impl Fn(&TickPosterior, &ObsView) -> R + Sync + Send,
) -> Result<Vec<R>> {
    params.validate()?;
    let tables = rate_tables(params, sample.n);
    let eta = match mode {
        Mode::Zi => 1.0,
        Mode::Gzi => params.eta_or_one(),
    };
    let per_session = par::map_collect(&sample.sessions, |s| sweep_session(s, sample.n, &tables, eta, &visit));
    Ok(per_session.into_iter().flatten().collect())
}

/// `ln` density of one observation.
pub fn observation_ln_density(post: &TickPosterior, view: &ObsView, mode: Mode) -> f64 {
    match mode {
        Mode::Zi => ln_depletion_zi(post, view.new_a, view.new_q),
        Mode::Gzi => ln_depletion_gzi(post, view.obs.s, view.new_a, view.new_q),
    }
}

/// Sum of in-sample log densities; `-inf` when an observation is impossible
/// under `params`.
pub fn log_likelihood(sample: &Sample, params: &ModelParams, mode: Mode) -> Result<f64> {
    let terms = map_observations(sample, params, mode, |post, view| {
        if view.obs.out_of_sample {
            0.0
        } else {
            observation_ln_density(post, view, mode)
        }
    })?;
    Ok(terms.into_iter().sum())
}
