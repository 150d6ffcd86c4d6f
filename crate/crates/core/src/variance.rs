//! Variance estimators for the adjusted treatment effect and the covariate
//! slopes.
//!
//! The group variances come from separate per-group sub-models
//! `Y_i = 1 b_i + M_i p + e_i`, which makes them independent and unbiased
//! under heteroscedasticity. `sigma_b^2 = Var(sqrt(N) (b1_hat - b2_hat))` is
//! then a weighted sum `N (s1^2 n1* + s2^2 n2*)` with weights taken from the
//! generating matrix `D`.

use serde::{Deserialize, Serialize};

use crate::data::{AncovaData, Group};
use crate::error::{Error, Result};
use crate::model::{full_design, FittedModel};
use crate::numerics::{
    hat_diagonals, matrix_rank, orth_complement_projector, pseudo_inverse, RealMatrix, Tolerance,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimates {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// Residual degrees of freedom of the group sub-models.
    pub df1: usize,
    pub df2: usize,
    pub sigma_b_sq: f64,
    pub sigma_pl_sq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HcFlavor {
    Hc0,
    Hc1,
    Hc2,
    Hc3,
}

impl HcFlavor {
    pub const ALL: [HcFlavor; 4] = [HcFlavor::Hc0, HcFlavor::Hc1, HcFlavor::Hc2, HcFlavor::Hc3];

    pub fn label(self) -> &'static str {
        match self {
            HcFlavor::Hc0 => "HC0",
            HcFlavor::Hc1 => "HC1",
            HcFlavor::Hc2 => "HC2",
            HcFlavor::Hc3 => "HC3",
        }
    }
}

/// `(1 ⋮ M_i)` for one group.
fn group_design(data: &AncovaData, group: Group) -> RealMatrix {
    let m = data.group_covariates(group);
    let n = m.nrows();
    RealMatrix::from_fn(
        n,
        1 + m.ncols(),
        |i, j| if j == 0 { 1.0 } else { m[(i, j - 1)] },
    )
}

/// Unbiased sub-model variance `Y_i' Q_i Y_i / df_i` and its degrees of freedom.
///
/// `df_i = n_i - r(1 ⋮ M_i)`, which is `n_i - 1 - r(M_i)` unless a covariate
/// is constant within the group.
pub fn group_variance(data: &AncovaData, group: Group, tol: &Tolerance) -> Result<(f64, usize)> {
    let b = group_design(data, group);
    let n = b.nrows();
    let rank = matrix_rank(&b, tol)?;
    let df = n as isize - rank as isize;
    if df < 1 {
        return Err(Error::DegenerateGroup {
            group: group.index(),
            n,
            df,
            required: rank + 1,
        });
    }
    let q = orth_complement_projector(&b, tol)?;
    let y = RealMatrix::from_column_slice(n, 1, data.group_response(group));
    let resid = q * y;
    Ok((resid.norm_squared() / df as f64, df as usize))
}

/// `N (s1^2 n1* + s2^2 n2*)`.
pub fn sigma_b_sq(sigma1_sq: f64, sigma2_sq: f64, n1_star: f64, n2_star: f64, n: usize) -> f64 {
    n as f64 * (sigma1_sq * n1_star + sigma2_sq * n2_star)
}

/// `N (s1^2 ñ_{1,l} + s2^2 ñ_{2,l})`.
pub fn sigma_pl_sq(sigma1_sq: f64, sigma2_sq: f64, n1_tilde: f64, n2_tilde: f64, n: usize) -> f64 {
    n as f64 * (sigma1_sq * n1_tilde + sigma2_sq * n2_tilde)
}

pub fn estimate_variances(
    data: &AncovaData,
    fit: &FittedModel,
    tol: &Tolerance,
) -> Result<VarianceEstimates> {
    let (s1, df1) = group_variance(data, Group::First, tol)?;
    let (s2, df2) = group_variance(data, Group::Second, tol)?;
    let n = data.n();
    Ok(VarianceEstimates {
        sigma1_sq: s1,
        sigma2_sq: s2,
        df1,
        df2,
        sigma_b_sq: sigma_b_sq(s1, s2, fit.n_star.0, fit.n_star.1, n),
        sigma_pl_sq: fit
            .n_tilde
            .iter()
            .map(|&(t1, t2)| sigma_pl_sq(s1, s2, t1, t2, n))
            .collect(),
    })
}

/// Diagonal weights of the sandwich meat for each flavor.
pub fn hc_weights(
    residuals: &[f64],
    leverage: &[f64],
    flavor: HcFlavor,
    n_covariates: usize,
) -> Result<Vec<f64>> {
    let n = residuals.len();
    match flavor {
        HcFlavor::Hc0 => Ok(residuals.iter().map(|e| e * e).collect()),
        HcFlavor::Hc1 => {
            let denom = n as isize - n_covariates as isize - 1;
            if denom < 1 {
                return Err(Error::InvalidInput(format!(
                    "HC1 scaling N/(N-L-1) undefined for N = {n}, L = {n_covariates}"
                )));
            }
            let c = n as f64 / denom as f64;
            Ok(residuals.iter().map(|e| c * e * e).collect())
        }
        HcFlavor::Hc2 | HcFlavor::Hc3 => {
            let power = if flavor == HcFlavor::Hc2 { 1 } else { 2 };
            residuals
                .iter()
                .zip(leverage)
                .enumerate()
                .map(|(k, (e, &h))| {
                    let room = 1.0 - h;
                    if room <= 1e-10 {
                        Err(Error::LeverageSingularity {
                            index: k,
                            leverage: h,
                        })
                    } else {
                        Ok(e * e / room.powi(power))
                    }
                })
                .collect()
        }
    }
}

/// Sandwich covariance `X^+ E X^+'` of the full coefficient vector
/// `(b1, b2, p1..pL)`, where `X^+ = (X'X)^- X'`.
pub fn hcse_covariance(
    xt: &RealMatrix,
    residuals: &[f64],
    flavor: HcFlavor,
    tol: &Tolerance,
) -> Result<RealMatrix> {
    if residuals.len() != xt.nrows() {
        return Err(Error::InvalidInput(
            "residual length does not match design".into(),
        ));
    }
    let pinv = pseudo_inverse(xt, tol)?;
    let h = hat_diagonals(xt, tol)?;
    let w = hc_weights(residuals, &h, flavor, xt.ncols().saturating_sub(2))?;
    let mut scaled = pinv.clone();
    for (j, wj) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*wj);
    }
    let g = scaled * pinv.transpose();
    Ok(0.5 * (&g + g.transpose()))
}

/// `N a' Γ a` with `a = (1, -1, 0, ..., 0)'`.
pub fn sigma_b_hc(gamma: &RealMatrix, n: usize) -> f64 {
    let v = gamma[(0, 0)] + gamma[(1, 1)] - gamma[(0, 1)] - gamma[(1, 0)];
    n as f64 * v.max(0.0)
}

/// All four sandwich estimates of `sigma_b^2` for a fitted dataset.
pub fn sigma_b_hc_all(
    data: &AncovaData,
    fit: &FittedModel,
    tol: &Tolerance,
) -> Result<[(HcFlavor, f64); 4]> {
    let xt = full_design(data);
    let pinv = pseudo_inverse(&xt, tol)?;
    let h = hat_diagonals(&xt, tol)?;
    let contrast: Vec<f64> = (0..data.n()).map(|j| pinv[(0, j)] - pinv[(1, j)]).collect();
    let mut out = [(HcFlavor::Hc0, 0.0); 4];
    for (slot, flavor) in out.iter_mut().zip(HcFlavor::ALL) {
        let w = hc_weights(&fit.residuals, &h, flavor, data.n_covariates())?;
        let v: f64 = contrast.iter().zip(&w).map(|(c, w)| c * c * w).sum();
        *slot = (flavor, data.n() as f64 * v);
    }
    Ok(out)
}

/// Homoscedastic pooled residual variance and `df_C = N - r(X ⋮ M)`.
pub fn pooled_classical_variance(data: &AncovaData, tol: &Tolerance) -> Result<(f64, usize)> {
    let xt = full_design(data);
    let rank = matrix_rank(&xt, tol)?;
    let df = data.n() as isize - rank as isize;
    if df < 1 {
        return Err(Error::DegeneratePooled(df));
    }
    let q = orth_complement_projector(&xt, tol)?;
    let y = RealMatrix::from_column_slice(data.n(), 1, data.y());
    Ok(((q * y).norm_squared() / df as f64, df as usize))
}

/// `c' (X'X)^- c` for a coefficient contrast `c` over `(b1, b2, p1..pL)`.
pub fn contrast_factor(xt_pinv: &RealMatrix, contrast: &[f64]) -> f64 {
    (0..xt_pinv.ncols())
        .map(|j| {
            let v: f64 = contrast
                .iter()
                .enumerate()
                .map(|(i, c)| c * xt_pinv[(i, j)])
                .sum();
            v * v
        })
        .sum()
}

/// Variance of the quadratic form `Y'QY` when `Y = mu + e` with iid errors of
/// variance `sigma2`, third central moment `mu3` and fourth `mu4`:
///
/// `(mu4 - 3 s^4) q'q + 2 s^4 tr(Q^2) + 4 s^2 mu'Q^2 mu + 4 mu3 mu'Q q`, `q = diag(Q)`.
pub fn quadratic_form_variance(
    q: &RealMatrix,
    mu: &[f64],
    sigma2: f64,
    mu3: f64,
    mu4: f64,
) -> Result<f64> {
    let n = q.nrows();
    if q.ncols() != n || mu.len() != n {
        return Err(Error::InvalidInput(
            "Q must be square and conform with mu".into(),
        ));
    }
    let diag: Vec<f64> = (0..n).map(|i| q[(i, i)]).collect();
    let qq: f64 = diag.iter().map(|v| v * v).sum();
    let q2 = q * q;
    let tr_q2 = q2.trace();
    let mu_v = RealMatrix::from_column_slice(n, 1, mu);
    let mu_q2_mu = (mu_v.transpose() * &q2 * &mu_v)[(0, 0)];
    let qd = RealMatrix::from_column_slice(n, 1, &diag);
    let mu_q_q = (mu_v.transpose() * q * qd)[(0, 0)];
    let s4 = sigma2 * sigma2;
    Ok((mu4 - 3.0 * s4) * qq + 2.0 * s4 * tr_q2 + 4.0 * sigma2 * mu_q2_mu + 4.0 * mu3 * mu_q_q)
}
