//! Domain types shared by the simulator, the density engine and the estimator.

mod events;
mod grid;
mod intensity;
mod params;

pub use events::{EventCode, L1History, L1Record};
pub use grid::{BookState, L1State, Tick, TickGrid};
pub use intensity::{
    preset, Cont, DistanceIntensity, IntensityModel, IntensitySpec, Luckock, Preset, Smith, Validation,
};
pub use params::{logistic, logit, DistanceRates, ModelParams, ParamMap, Variant};
