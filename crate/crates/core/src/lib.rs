//! Two-sample analysis of covariance without the equal-variance assumption.
//!
//! The model is `Y = Xb + Mp + e` with two group intercepts `b = (b1, b2)`,
//! common covariate slopes `p` and group-specific error variances. The crate
//! provides unbiased group variance estimators, the Welch-Satterthwaite
//! t-test with covariates, sandwich (HC0-HC3) alternatives, the classical
//! pooled ANCOVA test, a Rademacher wild bootstrap, and a simulation harness
//! for studying size, power and estimator bias.

pub mod bootstrap;
pub mod data;
pub mod datasets;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod sim;
pub mod variance;

pub use bootstrap::{wild_bootstrap_test, BootstrapConfig};
pub use data::{AncovaData, Group};
pub use error::{Error, Result};
pub use inference::{
    classical_ancova_test, covariate_test, normal_approx_test, welch_cov_test, welch_plain_test,
    Hypothesis, Inference, Method, TestResult,
};
pub use model::{fit, FittedModel};
pub use numerics::{RealMatrix, Tolerance};
pub use report::{analyze, AnalysisOptions, AnalysisReport};
pub use variance::{HcFlavor, VarianceEstimates};
