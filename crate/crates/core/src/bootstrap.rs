//! Wild bootstrap with Rademacher weights for the treatment effect or a slope.
//!
//! Resampled responses are `Y* = fitted + W ∘ r` with `r_j = e_j / sqrt(1 - h_j)`
//! (leverage-adjusted residuals) and `W_j = ±1`. Each resample is refitted and
//! studentized with the HC0 sandwich SE, centred at the observed estimate.
//! The p-value compares `|T*|` with the observed HC0 statistic; the interval
//! is `estimate ± z SE*` with `SE*` the standard deviation of the resampled
//! estimates.

use rayon::prelude::*;

use crate::data::AncovaData;
use crate::error::{Error, Result};
use crate::inference::{check_alpha, studentize, Hypothesis, Method, TestResult};
use crate::model::full_design;
use crate::numerics::{hat_diagonals, normal_quantile, pseudo_inverse, RealMatrix, Tolerance};
use crate::rng::{rademacher_vector, substream};

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub null_value: f64,
    /// Spread resamples over the rayon pool. Simulation drivers turn this off
    /// because they already parallelise over datasets.
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 10_000,
            seed: 1,
            hypothesis: Hypothesis::TreatmentDelta,
            null_value: 0.0,
            parallel: true,
        }
    }
}

impl BootstrapConfig {
    pub fn new(n_resamples: usize, seed: u64) -> Result<Self> {
        let cfg = BootstrapConfig {
            n_resamples,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_resamples < MIN_RESAMPLES {
            return Err(Error::InvalidInput(format!(
                "at least {MIN_RESAMPLES} bootstrap resamples are required, got {}",
                self.n_resamples
            )));
        }
        if !self.null_value.is_finite() {
            return Err(Error::NonFinite("hypothesized value"));
        }
        Ok(())
    }
}

/// Observed quantities and the resampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub estimate: f64,
    pub null_value: f64,
    /// HC0 standard error of the observed estimate.
    pub se: f64,
    pub statistic: f64,
    /// `estimate* - estimate` per resample.
    pub deviations: Vec<f64>,
    /// Studentized `T*` per resample.
    pub statistics: Vec<f64>,
}

impl BootstrapDraws {
    /// `(1 + #{|T*| >= |T|}) / (B + 1)`.
    pub fn p_value(&self) -> f64 {
        let t = self.statistic.abs();
        let exceed = self.statistics.iter().filter(|s| s.abs() >= t).count();
        (1 + exceed) as f64 / (self.statistics.len() + 1) as f64
    }

    /// Standard deviation of the resampled estimates.
    pub fn bootstrap_se(&self) -> f64 {
        let b = self.deviations.len() as f64;
        let mean = self.deviations.iter().sum::<f64>() / b;
        let ss: f64 = self.deviations.iter().map(|d| (d - mean).powi(2)).sum();
        (ss / (b - 1.0)).sqrt()
    }
}

struct Prepared {
    xt: RealMatrix,
    pinv: RealMatrix,
    /// Row of `X^+` picked out by the contrast: `estimate = w'Y`.
    w: Vec<f64>,
    adjusted: Vec<f64>,
    scale: f64,
}

fn prepare(
    data: &AncovaData,
    hypothesis: Hypothesis,
    tol: &Tolerance,
) -> Result<(Prepared, f64, f64)> {
    let xt = full_design(data);
    let pinv = pseudo_inverse(&xt, tol)?;
    let c = hypothesis.contrast(data.n_covariates())?;
    let w: Vec<f64> = (0..data.n())
        .map(|j| c.iter().enumerate().map(|(i, ci)| ci * pinv[(i, j)]).sum())
        .collect();
    let y = data.y();
    let beta = &pinv * RealMatrix::from_column_slice(data.n(), 1, y);
    let fitted = &xt * &beta;
    let h = hat_diagonals(&xt, tol)?;
    let mut adjusted = Vec::with_capacity(data.n());
    let mut hc0 = 0.0;
    for j in 0..data.n() {
        let e = y[j] - fitted[j];
        let room = 1.0 - h[j];
        if room <= 1e-10 {
            return Err(Error::LeverageSingularity {
                index: j,
                leverage: h[j],
            });
        }
        adjusted.push(e / room.sqrt());
        hc0 += w[j] * w[j] * e * e;
    }
    let estimate: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let scale = y.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    Ok((
        Prepared {
            xt,
            pinv,
            w,
            adjusted,
            scale,
        },
        estimate,
        hc0.sqrt(),
    ))
}

impl Prepared {
    /// `(estimate* - estimate, T*)` for one sign vector.
    fn resample(&self, signs: &[f64]) -> (f64, f64) {
        let u: Vec<f64> = self
            .adjusted
            .iter()
            .zip(signs)
            .map(|(r, s)| r * s)
            .collect();
        let k = self.pinv.nrows();
        let beta: Vec<f64> = (0..k)
            .map(|i| (0..u.len()).map(|j| self.pinv[(i, j)] * u[j]).sum())
            .collect();
        let mut var = 0.0;
        for (j, uj) in u.iter().enumerate() {
            let fit: f64 = (0..k).map(|i| self.xt[(j, i)] * beta[i]).sum();
            let e = uj - fit;
            var += self.w[j] * self.w[j] * e * e;
        }
        let dev: f64 = self.w.iter().zip(&u).map(|(a, b)| a * b).sum();
        (dev, studentize(dev, var.sqrt(), self.scale))
    }
}

/// Runs the resampling and returns the raw draws.
pub fn wild_bootstrap_draws(
    data: &AncovaData,
    cfg: &BootstrapConfig,
    tol: &Tolerance,
) -> Result<BootstrapDraws> {
    cfg.validate()?;
    let (prep, estimate, se) = prepare(data, cfg.hypothesis, tol)?;
    let n = data.n();
    let one = |b: usize| {
        let signs = rademacher_vector(n, &mut substream(cfg.seed, &[b as u64]));
        prep.resample(&signs)
    };
    let pairs: Vec<(f64, f64)> = if cfg.parallel {
        (0..cfg.n_resamples).into_par_iter().map(one).collect()
    } else {
        (0..cfg.n_resamples).map(one).collect()
    };
    let (deviations, statistics) = pairs.into_iter().unzip();
    Ok(BootstrapDraws {
        estimate,
        null_value: cfg.null_value,
        se,
        statistic: studentize(estimate - cfg.null_value, se, prep.scale),
        deviations,
        statistics,
    })
}

pub fn wild_bootstrap_test(
    data: &AncovaData,
    cfg: &BootstrapConfig,
    alpha: f64,
    tol: &Tolerance,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let draws = wild_bootstrap_draws(data, cfg, tol)?;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * draws.bootstrap_se();
    Ok(TestResult {
        method: Method::WildBootstrap,
        effect: draws.estimate,
        null_value: cfg.null_value,
        se: draws.se,
        statistic: draws.statistic,
        df: None,
        p_value: draws.p_value(),
        alpha,
        critical_value: if draws.se > 0.0 { half / draws.se } else { z },
        ci_lower: draws.estimate - half,
        ci_upper: draws.estimate + half,
        resamples: Some(cfg.n_resamples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::variance::{sigma_b_hc_all, HcFlavor};
    use approx::assert_abs_diff_eq;

    fn cfg(b: usize, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            n_resamples: b,
            seed,
            ..BootstrapConfig::default()
        }
    }

    #[test]
    fn bodyweight_row() {
        let data = datasets::bodyweight().unwrap();
        let r = wild_bootstrap_test(&data, &cfg(10_000, 20_240_601), 0.05, &Tolerance::default())
            .unwrap();
        assert_abs_diff_eq!(r.se, 2.46, epsilon = 0.01);
        assert_abs_diff_eq!(r.statistic, -1.91, epsilon = 0.01);
        assert!((r.p_value - 0.082).abs() <= 0.01, "{}", r.p_value);
        assert!((r.ci_lower + 9.81).abs() <= 0.15, "{}", r.ci_lower);
        assert!((r.ci_upper - 0.40).abs() <= 0.15, "{}", r.ci_upper);
        assert_eq!(r.resamples, Some(10_000));
    }

    #[test]
    fn observed_se_is_hc0() {
        let data = datasets::bodyweight().unwrap();
        let tol = Tolerance::default();
        let fit = crate::model::fit(&data, &tol).unwrap();
        let hc = sigma_b_hc_all(&data, &fit, &tol).unwrap();
        let draws = wild_bootstrap_draws(&data, &cfg(100, 1), &tol).unwrap();
        assert_eq!(hc[HcFlavor::Hc0 as usize].0, HcFlavor::Hc0);
        assert_abs_diff_eq!(draws.se, (hc[0].1 / 52.0).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(draws.estimate, fit.delta(), epsilon = 1e-10);
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let data = datasets::bodyweight().unwrap();
        let tol = Tolerance::default();
        let a = wild_bootstrap_draws(&data, &cfg(500, 9), &tol).unwrap();
        let b = wild_bootstrap_draws(&data, &cfg(500, 9), &tol).unwrap();
        let serial = BootstrapConfig {
            parallel: false,
            ..cfg(500, 9)
        };
        let c = wild_bootstrap_draws(&data, &serial, &tol).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = wild_bootstrap_draws(&data, &cfg(500, 10), &tol).unwrap();
        assert_ne!(a.deviations, d.deviations);
    }

    #[test]
    fn p_value_ignores_resample_order() {
        let data = datasets::bodyweight().unwrap();
        let mut draws = wild_bootstrap_draws(&data, &cfg(300, 4), &Tolerance::default()).unwrap();
        let p = draws.p_value();
        draws.statistics.reverse();
        draws.statistics.rotate_left(17);
        assert_eq!(p, draws.p_value());
    }

    #[test]
    fn identical_groups_never_reject() {
        let y = [3.0, 1.0, 4.0, 1.5, 5.0, 2.2];
        let m = [0.2, 0.9, 1.1, 2.0, 0.4, 1.6];
        let mm: Vec<f64> = m.iter().chain(&m).copied().collect();
        let data =
            AncovaData::from_groups(&y, &y, RealMatrix::from_column_slice(12, 1, &mm)).unwrap();
        let r = wild_bootstrap_test(&data, &cfg(1000, 3), 0.05, &Tolerance::default()).unwrap();
        assert!(r.p_value >= 0.99, "{}", r.p_value);
        assert!(!r.rejects());
    }

    #[test]
    fn resampled_effects_centre_on_zero() {
        let data = datasets::bodyweight().unwrap();
        let draws = wild_bootstrap_draws(&data, &cfg(4000, 11), &Tolerance::default()).unwrap();
        let b = draws.deviations.len() as f64;
        let mean = draws.deviations.iter().sum::<f64>() / b;
        let mc_se = draws.bootstrap_se() / b.sqrt();
        assert!(mean.abs() <= 3.0 * mc_se, "{mean} vs {mc_se}");
    }

    #[test]
    fn covariate_hypothesis() {
        let data = datasets::bodyweight().unwrap();
        let c = BootstrapConfig {
            hypothesis: Hypothesis::Covariate(1),
            ..cfg(500, 2)
        };
        let r = wild_bootstrap_test(&data, &c, 0.05, &Tolerance::default()).unwrap();
        assert_abs_diff_eq!(r.effect, 1.276, epsilon = 1e-3);
        assert!(r.p_value < 0.01);
        let bad = BootstrapConfig {
            hypothesis: Hypothesis::Covariate(2),
            ..cfg(500, 2)
        };
        assert!(matches!(
            wild_bootstrap_test(&data, &bad, 0.05, &Tolerance::default()),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn too_few_resamples() {
        let data = datasets::bodyweight().unwrap();
        assert!(wild_bootstrap_test(&data, &cfg(99, 1), 0.05, &Tolerance::default()).is_err());
        assert!(BootstrapConfig::new(50, 1).is_err());
    }

    #[test]
    fn full_leverage_point_is_reported() {
        // Group 2 has two rows, one of which is the only one with a nonzero
        // second covariate: leverage 1.
        let m = RealMatrix::from_row_slice(
            6,
            2,
            &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 1.5, 0.0, 2.5, 0.0, 0.7, 1.0],
        );
        let data = AncovaData::from_groups(&[1.0, 2.0, 2.5], &[0.5, 1.0, 4.0], m).unwrap();
        assert!(matches!(
            wild_bootstrap_test(&data, &cfg(100, 1), 0.05, &Tolerance::default()),
            Err(Error::LeverageSingularity { index: 5, .. })
        ));
    }
}
