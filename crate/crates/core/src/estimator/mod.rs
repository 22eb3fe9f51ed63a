//! Maximum-likelihood estimation of the in-book intensities, model
//! selection and out-of-sample evaluation.

pub mod fit;
pub mod likelihood;
pub mod optim;
pub mod predict;
pub mod sample;
pub mod wilcoxon;

pub use fit::{
    fit, information_matrix, initial_guess, lr_test, observed_information, select_model, FitOptions, FitResult,
    LadderEntry, SelectOptions, SelectionOutcome, StopReason,
};
pub use likelihood::{log_likelihood, map_observations, observation_ln_density, ObsView};
pub use optim::{central_gradient, fd_hessian, five_point_gradient, maximize, OptBudget, OptOutcome};
pub use predict::{moment_cap_filter, p_m_from, prediction_power, FilterReport, MeanBasis, PredictionReport};
pub use sample::{split_sizes, AskStep, Mode, Obs, Sample, Session, DEFAULT_CAP, MIN_OBSERVATIONS};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
