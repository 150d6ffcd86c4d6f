//! Two-sided tests and confidence intervals for the adjusted treatment effect
//! `delta = b1 - b2` and for single covariate slopes `p_l`.

use serde::{Deserialize, Serialize};

use crate::data::AncovaData;
use crate::error::{Error, Result};
use crate::model::{fit, full_design, FittedModel};
use crate::numerics::{normal_cdf, normal_quantile, pseudo_inverse, t_quantile, t_sf, Tolerance};
use crate::variance::{
    contrast_factor, estimate_variances, pooled_classical_variance, VarianceEstimates,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WelchSatterthwaiteCov,
    ClassicalAncova,
    NormalApprox,
    WildBootstrap,
    WelchPlain,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::WelchSatterthwaiteCov => "welch_satterthwaite_cov",
            Method::ClassicalAncova => "classical_ancova",
            Method::NormalApprox => "normal_approx",
            Method::WildBootstrap => "wild_bootstrap",
            Method::WelchPlain => "welch_plain",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "welch_satterthwaite_cov" | "welch" | "tkappa" => Some(Method::WelchSatterthwaiteCov),
            "classical_ancova" | "classical" => Some(Method::ClassicalAncova),
            "normal_approx" | "normal" => Some(Method::NormalApprox),
            "wild_bootstrap" | "wild" | "bootstrap" => Some(Method::WildBootstrap),
            "welch_plain" => Some(Method::WelchPlain),
            _ => None,
        }
    }
}

/// Which linear function of `(b1, b2, p1..pL)` is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `b1 - b2`.
    TreatmentDelta,
    /// `p_l`, 1-based.
    Covariate(usize),
}

impl Hypothesis {
    /// Contrast over the full coefficient vector of a model with `l` covariates.
    pub fn contrast(self, l: usize) -> Result<Vec<f64>> {
        let mut c = vec![0.0; 2 + l];
        match self {
            Hypothesis::TreatmentDelta => {
                c[0] = 1.0;
                c[1] = -1.0;
            }
            Hypothesis::Covariate(k) => {
                if k == 0 || k > l {
                    return Err(Error::IndexOutOfRange { index: k, max: l });
                }
                c[1 + k] = 1.0;
            }
        }
        Ok(c)
    }

    pub fn label(self) -> String {
        match self {
            Hypothesis::TreatmentDelta => "treatment_delta".into(),
            Hypothesis::Covariate(l) => format!("covariate_{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub effect: f64,
    pub null_value: f64,
    /// Standard error of `effect` (the variance estimate divided by `N`, square-rooted).
    pub se: f64,
    pub statistic: f64,
    /// `None` for asymptotic and resampling references.
    pub df: Option<f64>,
    pub p_value: f64,
    pub alpha: f64,
    /// Multiplier of `se` giving the interval half-width.
    pub critical_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub resamples: Option<usize>,
}

impl TestResult {
    /// Two-sided rejection at level `alpha`. Analytic references compare the
    /// statistic with the critical value, so they agree exactly with the CI.
    pub fn rejects(&self) -> bool {
        match self.method {
            Method::WildBootstrap => self.p_value <= self.alpha,
            _ => self.statistic.abs() >= self.critical_value,
        }
    }

    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(alpha))
    }
}

/// `(effect - null) / se`. Deviations at rounding level relative to the
/// response scale count as exactly zero, and a vanishing SE with a real
/// deviation gives ±inf instead of NaN.
pub(crate) fn studentize(deviation: f64, se: f64, scale: f64) -> f64 {
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if deviation.abs() <= eps {
        0.0
    } else if se > eps {
        deviation / se
    } else {
        deviation.signum() * f64::INFINITY
    }
}

/// Satterthwaite degrees of freedom of `u1 + u2` where `u_i` carries `df_i`.
pub fn satterthwaite_df(u1: f64, u2: f64, df1: f64, df2: f64) -> f64 {
    let denom = u1 * u1 / df1 + u2 * u2 / df2;
    if denom > 0.0 {
        (u1 + u2).powi(2) / denom
    } else {
        df1 + df2
    }
}

#[allow(clippy::too_many_arguments)]
fn reference_test(
    method: Method,
    effect: f64,
    null_value: f64,
    se: f64,
    df: Option<f64>,
    alpha: f64,
    scale: f64,
    tol: &Tolerance,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let statistic = studentize(effect - null_value, se, scale);
    let (p_value, critical_value) = match df {
        Some(df) => (
            (2.0 * t_sf(statistic.abs(), df)?).min(1.0),
            t_quantile(1.0 - alpha / 2.0, df, tol.prob_tol)?,
        ),
        None => (
            (2.0 * normal_cdf(-statistic.abs())).min(1.0),
            normal_quantile(1.0 - alpha / 2.0),
        ),
    };
    let half = critical_value * se;
    Ok(TestResult {
        method,
        effect,
        null_value,
        se,
        statistic,
        df,
        p_value,
        alpha,
        critical_value,
        ci_lower: effect - half,
        ci_upper: effect + half,
        resamples: None,
    })
}

fn response_scale(data: &AncovaData) -> f64 {
    data.y().iter().fold(1.0_f64, |a, v| a.max(v.abs()))
}

/// A fitted dataset plus its group variances, ready for any of the analytic
/// tests. Group-variance failures are kept so that the classical test still
/// works when a sub-model is degenerate.
#[derive(Debug, Clone)]
pub struct Inference<'a> {
    data: &'a AncovaData,
    fit: FittedModel,
    variances: Result<VarianceEstimates>,
    tol: Tolerance,
}

impl<'a> Inference<'a> {
    pub fn new(data: &'a AncovaData, tol: &Tolerance) -> Result<Self> {
        let fit = fit(data, tol)?;
        let variances = estimate_variances(data, &fit, tol);
        Ok(Inference {
            data,
            fit,
            variances,
            tol: *tol,
        })
    }

    pub fn fit(&self) -> &FittedModel {
        &self.fit
    }

    pub fn variances(&self) -> Result<&VarianceEstimates> {
        self.variances.as_ref().map_err(Clone::clone)
    }

    fn effect(&self, target: Hypothesis) -> Result<f64> {
        match target {
            Hypothesis::TreatmentDelta => Ok(self.fit.delta()),
            Hypothesis::Covariate(l) => {
                if l == 0 || l > self.fit.p_hat.len() {
                    Err(Error::IndexOutOfRange {
                        index: l,
                        max: self.fit.p_hat.len(),
                    })
                } else {
                    Ok(self.fit.p_hat[l - 1])
                }
            }
        }
    }

    /// Weighted components `(s1^2 w1, s2^2 w2)` of the variance of the target.
    fn components(&self, target: Hypothesis) -> Result<(f64, f64, &VarianceEstimates)> {
        let v = self.variances()?;
        let (w1, w2) = match target {
            Hypothesis::TreatmentDelta => self.fit.n_star,
            Hypothesis::Covariate(l) => {
                self.effect(target)?;
                self.fit.n_tilde[l - 1]
            }
        };
        Ok((v.sigma1_sq * w1, v.sigma2_sq * w2, v))
    }

    /// Welch-Satterthwaite t-test with covariates (`T_kappa` for the treatment
    /// effect, `T_lambda` for a slope).
    pub fn welch(&self, target: Hypothesis, null_value: f64, alpha: f64) -> Result<TestResult> {
        let effect = self.effect(target)?;
        let (u1, u2, v) = self.components(target)?;
        let df = satterthwaite_df(u1, u2, v.df1 as f64, v.df2 as f64);
        reference_test(
            Method::WelchSatterthwaiteCov,
            effect,
            null_value,
            (u1 + u2).sqrt(),
            Some(df),
            alpha,
            response_scale(self.data),
            &self.tol,
        )
    }

    /// Same statistic as [`Inference::welch`] against the standard normal.
    pub fn normal(&self, target: Hypothesis, null_value: f64, alpha: f64) -> Result<TestResult> {
        let effect = self.effect(target)?;
        let (u1, u2, _) = self.components(target)?;
        reference_test(
            Method::NormalApprox,
            effect,
            null_value,
            (u1 + u2).sqrt(),
            None,
            alpha,
            response_scale(self.data),
            &self.tol,
        )
    }

    /// Homoscedastic test using the pooled residual variance.
    pub fn classical(&self, target: Hypothesis, null_value: f64, alpha: f64) -> Result<TestResult> {
        let effect = self.effect(target)?;
        let (s2, df) = pooled_classical_variance(self.data, &self.tol)?;
        let xt = full_design(self.data);
        let pinv = pseudo_inverse(&xt, &self.tol)?;
        let c = target.contrast(self.data.n_covariates())?;
        let se = (s2 * contrast_factor(&pinv, &c)).sqrt();
        reference_test(
            Method::ClassicalAncova,
            effect,
            null_value,
            se,
            Some(df as f64),
            alpha,
            response_scale(self.data),
            &self.tol,
        )
    }
}

/// Welch-Satterthwaite t-test with covariates for `H0: b1 = b2`.
pub fn welch_cov_test(data: &AncovaData, alpha: f64, tol: &Tolerance) -> Result<TestResult> {
    Inference::new(data, tol)?.welch(Hypothesis::TreatmentDelta, 0.0, alpha)
}

/// `H0: p_l = 0` with `lambda_l` degrees of freedom; `l` is 1-based.
pub fn covariate_test(
    data: &AncovaData,
    l: usize,
    alpha: f64,
    tol: &Tolerance,
) -> Result<TestResult> {
    Inference::new(data, tol)?.welch(Hypothesis::Covariate(l), 0.0, alpha)
}

pub fn classical_ancova_test(data: &AncovaData, alpha: f64, tol: &Tolerance) -> Result<TestResult> {
    Inference::new(data, tol)?.classical(Hypothesis::TreatmentDelta, 0.0, alpha)
}

pub fn normal_approx_test(data: &AncovaData, alpha: f64, tol: &Tolerance) -> Result<TestResult> {
    Inference::new(data, tol)?.normal(Hypothesis::TreatmentDelta, 0.0, alpha)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Classic Welch two-sample t-test without covariates.
pub fn welch_plain_test(y1: &[f64], y2: &[f64], alpha: f64) -> Result<TestResult> {
    if y1.len() < 2 || y2.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "Welch test needs at least 2 observations per sample (got {} and {})",
            y1.len(),
            y2.len()
        )));
    }
    if y1.iter().chain(y2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    let (m1, v1) = mean_var(y1);
    let (m2, v2) = mean_var(y2);
    let (n1, n2) = (y1.len() as f64, y2.len() as f64);
    let (u1, u2) = (v1 / n1, v2 / n2);
    let df = satterthwaite_df(u1, u2, n1 - 1.0, n2 - 1.0);
    let scale = y1.iter().chain(y2).fold(1.0_f64, |a, v| a.max(v.abs()));
    reference_test(
        Method::WelchPlain,
        m1 - m2,
        0.0,
        (u1 + u2).sqrt(),
        Some(df),
        alpha,
        scale,
        &Tolerance::default(),
    )
}
