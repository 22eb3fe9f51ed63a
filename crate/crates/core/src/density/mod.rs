//! Conditional densities of L1 jumps given the observed history.

pub mod bipo;
pub mod jumps;
pub mod posterior;
pub mod rates;

pub use bipo::{bipo_pmf, ln_bipo_pmf, log_sum_exp};
pub use jumps::{
    conditional_mean_jump, jump_density_gzi, jump_density_zi, landing_law, ln_depletion_gzi, ln_depletion_zi,
    price_impact, s_value, ImpactLaw, JumpContext, LandingLaw, DENSITY_TAIL, MEAN_TAIL,
};
pub use posterior::{TickLaw, TickPosterior};
pub use rates::{event_time_density, rate_summary, EventRateSummary};
