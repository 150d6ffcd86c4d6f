//! Monte-Carlo studies of size, power and estimator bias.

mod distribution;
mod setting;
mod study;
mod timing;

pub use distribution::ErrorDistribution;
pub use setting::{
    draw_covariates, generate_dataset, generate_with_covariates, CovariateMode, SimSetting,
};
pub use study::{
    estimator_bias_study, power_study, rejection_rates, type1_study, BiasGrid, BiasRow, RateRow,
    StudyConfig, StudyResult, TimingRow, MIN_NSIM,
};
pub use timing::timing_benchmark;
