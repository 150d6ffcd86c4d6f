use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::setting::{draw_covariates, generate_with_covariates, CovariateMode, SimSetting};
use crate::bootstrap::{wild_bootstrap_test, BootstrapConfig};
use crate::data::{AncovaData, Group};
use crate::error::{Error, Result};
use crate::inference::{check_alpha, welch_plain_test, Hypothesis, Inference, Method};
use crate::model::fit;
use crate::numerics::Tolerance;
use crate::rng::{mix, substream};
use crate::variance::{group_variance, sigma_b_hc_all, sigma_b_sq, HcFlavor};

const FIXED_DESIGN_TAG: u64 = 0xF1ED;
const BOOTSTRAP_TAG: u64 = 0xB007;

pub const MIN_NSIM: usize = 1000;

/// Shared knobs of a rejection-rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub nsim: usize,
    pub seed: u64,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub hypothesis: Hypothesis,
    /// Resamples per dataset for [`Method::WildBootstrap`].
    pub bootstrap_resamples: usize,
}

impl StudyConfig {
    pub fn new(nsim: usize, seed: u64, methods: Vec<Method>) -> Self {
        StudyConfig {
            nsim,
            seed,
            alpha: 0.05,
            methods,
            hypothesis: Hypothesis::TreatmentDelta,
            bootstrap_resamples: 2000,
        }
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.nsim < MIN_NSIM {
            return Err(Error::InvalidInput(format!(
                "rejection-rate studies need nsim >= {MIN_NSIM}, got {}",
                self.nsim
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        if self.methods.contains(&Method::WelchPlain)
            && self.hypothesis != Hypothesis::TreatmentDelta
        {
            return Err(Error::InvalidInput(
                "welch_plain only tests the treatment effect".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub setting: String,
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub distribution: String,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// True `b2 - b1`.
    pub delta: f64,
    pub hypothesis: String,
    pub method: Method,
    pub rejections: usize,
    pub nsim: usize,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub n1: usize,
    pub n2: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub estimator: String,
    pub mean_estimate: f64,
    pub mean_truth: f64,
    pub bias: f64,
    pub relative_bias: f64,
    pub mse: f64,
    /// Monte-Carlo standard error of `bias`.
    pub bias_mc_se: f64,
    pub nsim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n_tests: usize,
    pub method: Method,
    pub seconds: f64,
    pub per_test_ms: f64,
}

/// Tables produced by a study. Each study fills one of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: String,
    pub seed: u64,
    pub nsim: usize,
    pub alpha: f64,
    pub rates: Vec<RateRow>,
    pub bias: Vec<BiasRow>,
    pub timing: Vec<TimingRow>,
}

impl StudyResult {
    fn empty(study: &str, seed: u64, nsim: usize, alpha: f64) -> Self {
        StudyResult {
            study: study.into(),
            seed,
            nsim,
            alpha,
            rates: Vec::new(),
            bias: Vec::new(),
            timing: Vec::new(),
        }
    }

    fn table_csv<T: Serialize>(rows: &[T]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// The non-empty table as CSV.
    pub fn to_csv(&self) -> Result<String> {
        if !self.bias.is_empty() {
            Self::table_csv(&self.bias)
        } else if !self.timing.is_empty() {
            Self::table_csv(&self.timing)
        } else {
            Self::table_csv(&self.rates)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `<dir>/<study>.csv` and `<dir>/<study>.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let csv_path = dir.join(format!("{}.csv", self.study));
        let json_path = dir.join(format!("{}.json", self.study));
        std::fs::write(&csv_path, self.to_csv()?)?;
        std::fs::write(&json_path, self.to_json()? + "\n")?;
        Ok((csv_path, json_path))
    }
}

/// Generator for replication `r` of a cell: covariates come from the same
/// stream unless the cell holds them fixed.
fn replicate(setting: &SimSetting, seed: u64, r: usize) -> Result<AncovaData> {
    let key = setting.stream_key();
    let mut rng = substream(seed, &[key, r as u64]);
    let m = match setting.covariate_mode {
        CovariateMode::Redraw => draw_covariates(setting, &mut rng),
        CovariateMode::Fixed => {
            draw_covariates(setting, &mut substream(seed, &[key ^ FIXED_DESIGN_TAG, 0]))
        }
    };
    generate_with_covariates(setting, m, &mut rng)
}

fn decisions(
    data: &AncovaData,
    cfg: &StudyConfig,
    boot_seed: u64,
    tol: &Tolerance,
) -> Result<Vec<bool>> {
    let inf = Inference::new(data, tol)?;
    let h = cfg.hypothesis;
    cfg.methods
        .iter()
        .map(|m| {
            Ok(match m {
                Method::WelchSatterthwaiteCov => inf.welch(h, 0.0, cfg.alpha)?.rejects(),
                Method::NormalApprox => inf.normal(h, 0.0, cfg.alpha)?.rejects(),
                Method::ClassicalAncova => inf.classical(h, 0.0, cfg.alpha)?.rejects(),
                Method::WelchPlain => welch_plain_test(
                    data.group_response(Group::First),
                    data.group_response(Group::Second),
                    cfg.alpha,
                )?
                .rejects(),
                Method::WildBootstrap => {
                    let bc = BootstrapConfig {
                        n_resamples: cfg.bootstrap_resamples,
                        seed: boot_seed,
                        hypothesis: h,
                        null_value: 0.0,
                        parallel: false,
                    };
                    wild_bootstrap_test(data, &bc, cfg.alpha, tol)?.rejects()
                }
            })
        })
        .collect()
}

/// Rejection rates of every configured method in one cell.
pub fn rejection_rates(setting: &SimSetting, cfg: &StudyConfig) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    setting.validate()?;
    let tol = Tolerance::default();
    let key = setting.stream_key();
    let per_rep: Vec<Vec<bool>> = (0..cfg.nsim)
        .into_par_iter()
        .map(|r| {
            let data = replicate(setting, cfg.seed, r)?;
            decisions(
                &data,
                cfg,
                mix(&[cfg.seed, key, r as u64, BOOTSTRAP_TAG]),
                &tol,
            )
        })
        .collect::<Result<_>>()?;
    let (n1, n2) = setting.sizes();
    Ok(cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let rejections = per_rep.iter().filter(|d| d[k]).count();
            let rate = rejections as f64 / cfg.nsim as f64;
            RateRow {
                setting: setting.label.clone(),
                n1,
                n2,
                m: setting.m,
                distribution: setting.distribution.label().into(),
                sigma1_sq: setting.sigma1_sq,
                sigma2_sq: setting.sigma2_sq,
                delta: setting.b[1] - setting.b[0],
                hypothesis: cfg.hypothesis.label(),
                method,
                rejections,
                nsim: cfg.nsim,
                rate,
                mc_se: (rate * (1.0 - rate) / cfg.nsim as f64).sqrt(),
            }
        })
        .collect())
}

/// Type-1 error rates over a list of cells. For slope hypotheses the caller
/// sets the tested slope to 0 in each cell.
pub fn type1_study(settings: &[SimSetting], cfg: &StudyConfig) -> Result<StudyResult> {
    let name = match cfg.hypothesis {
        Hypothesis::TreatmentDelta => "type1",
        Hypothesis::Covariate(_) => "type1p",
    };
    let mut out = StudyResult::empty(name, cfg.seed, cfg.nsim, cfg.alpha);
    for s in settings {
        out.rates.extend(rejection_rates(s, cfg)?);
    }
    Ok(out)
}

/// Rejection rates for `b = (b1, b1 + delta)` over a grid of shifts. All
/// shifts reuse the same simulated errors, so `delta = 0` reproduces the
/// type-1 study of the same cell exactly.
pub fn power_study(base: &SimSetting, deltas: &[f64], cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.hypothesis != Hypothesis::TreatmentDelta {
        return Err(Error::InvalidInput(
            "power studies target the treatment effect".into(),
        ));
    }
    if deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidInput("shifts must be nonnegative".into()));
    }
    let mut out = StudyResult::empty("power", cfg.seed, cfg.nsim, cfg.alpha);
    for &d in deltas {
        out.rates
            .extend(rejection_rates(&base.clone().with_shift(d), cfg)?);
    }
    Ok(out)
}

/// Cells of an estimator-bias study: every `(n1, n2)` pair from `sizes`
/// crossed with every variance pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasGrid {
    pub sizes: Vec<usize>,
    pub variances: Vec<(f64, f64)>,
}

impl Default for BiasGrid {
    fn default() -> Self {
        BiasGrid {
            sizes: vec![7, 10, 15, 20, 30, 40],
            variances: vec![(1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (3.0, 3.0)],
        }
    }
}

const BIAS_ESTIMATORS: [&str; 7] = [
    "sigma_b",
    "HC0",
    "HC1",
    "HC2",
    "HC3",
    "sigma1_sq",
    "sigma2_sq",
];

/// `(estimates, truths)` for one dataset, in [`BIAS_ESTIMATORS`] order.
fn bias_draw(data: &AncovaData, s1: f64, s2: f64, tol: &Tolerance) -> Result<([f64; 7], [f64; 7])> {
    let fitted = fit(data, tol)?;
    let (v1, _) = group_variance(data, Group::First, tol)?;
    let (v2, _) = group_variance(data, Group::Second, tol)?;
    let n = data.n();
    let (w1, w2) = fitted.n_star;
    let truth_b = sigma_b_sq(s1, s2, w1, w2, n);
    let hc = sigma_b_hc_all(data, &fitted, tol)?;
    let est = [
        sigma_b_sq(v1, v2, w1, w2, n),
        hc[HcFlavor::Hc0 as usize].1,
        hc[HcFlavor::Hc1 as usize].1,
        hc[HcFlavor::Hc2 as usize].1,
        hc[HcFlavor::Hc3 as usize].1,
        v1,
        v2,
    ];
    let truth = [truth_b, truth_b, truth_b, truth_b, truth_b, s1, s2];
    Ok((est, truth))
}

/// Bias and MSE of `sigma_b^2`, the four sandwich estimators and the group
/// variances. The target for the `sigma_b^2`-type estimators is computed per
/// dataset from the true variances and that dataset's weights.
pub fn estimator_bias_study(
    grid: &BiasGrid,
    base: &SimSetting,
    nsim: usize,
    seed: u64,
) -> Result<StudyResult> {
    if nsim < 2 {
        return Err(Error::InvalidInput("bias study needs nsim >= 2".into()));
    }
    let tol = Tolerance::default();
    let mut out = StudyResult::empty("bias", seed, nsim, 0.05);
    for &n1 in &grid.sizes {
        for &n2 in &grid.sizes {
            for &(s1, s2) in &grid.variances {
                let mut cell = base.clone();
                cell.n1 = n1;
                cell.n2 = n2;
                cell.m = 0;
                cell.sigma1_sq = s1;
                cell.sigma2_sq = s2;
                cell.label = format!("n{n1}_{n2}_v{s1}_{s2}");
                cell.validate()?;
                if n1.min(n2) < cell.n_covariates() + 2 {
                    return Err(Error::InvalidInput(format!(
                        "cell ({n1}, {n2}) leaves no residual degrees of freedom with {} covariates",
                        cell.n_covariates()
                    )));
                }
                let draws: Vec<([f64; 7], [f64; 7])> = (0..nsim)
                    .into_par_iter()
                    .map(|r| bias_draw(&replicate(&cell, seed, r)?, s1, s2, &tol))
                    .collect::<Result<_>>()?;
                let nf = nsim as f64;
                for (k, name) in BIAS_ESTIMATORS.iter().enumerate() {
                    let mean_estimate = draws.iter().map(|d| d.0[k]).sum::<f64>() / nf;
                    let mean_truth = draws.iter().map(|d| d.1[k]).sum::<f64>() / nf;
                    let diffs: Vec<f64> = draws.iter().map(|d| d.0[k] - d.1[k]).collect();
                    let bias = diffs.iter().sum::<f64>() / nf;
                    let mse = diffs.iter().map(|d| d * d).sum::<f64>() / nf;
                    let var = diffs.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (nf - 1.0);
                    out.bias.push(BiasRow {
                        n1,
                        n2,
                        sigma1_sq: s1,
                        sigma2_sq: s2,
                        estimator: (*name).into(),
                        mean_estimate,
                        mean_truth,
                        bias,
                        relative_bias: bias / mean_truth,
                        mse,
                        bias_mc_se: (var / nf).sqrt(),
                        nsim,
                    });
                }
            }
        }
    }
    Ok(out)
}
