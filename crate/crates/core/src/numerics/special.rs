//! Student-t (fractional degrees of freedom), normal and chi-squared
//! probabilities. Gamma and beta functions come from `statrs`, `erfc` from `libm`.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::{beta, erf, gamma};

use crate::error::{Error, Result};

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized incomplete beta function `I_x(a, b)`, clamped outside `[0, 1]`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

fn check_df(df: f64) -> Result<()> {
    if df > 0.0 && !df.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidDf(df))
    }
}

/// Upper tail `P(T > x)` of the central t distribution with real `df > 0`.
pub fn t_sf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if x.is_nan() {
        return Err(Error::InvalidInput("t_sf evaluated at NaN".into()));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    if df.is_infinite() {
        return Ok(normal_cdf(-x));
    }
    // P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2)
    let xb = df / (df + x * x);
    let two_sided = regularized_incomplete_beta(xb, 0.5 * df, 0.5);
    Ok(if x > 0.0 {
        0.5 * two_sided
    } else {
        1.0 - 0.5 * two_sided
    })
}

/// Cumulative distribution function of the central t distribution.
pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    t_sf(-x, df)
}

pub fn t_pdf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if df.is_infinite() {
        return Ok((-0.5 * x * x).exp() / (2.0 * PI).sqrt());
    }
    let ln = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p();
    Ok(ln.exp())
}

/// Quantile of the central t distribution, found by a safeguarded Newton
/// iteration inside a bracket on `t_cdf`. Iteration stops once the CDF is
/// within `prob_tol / 1000` of `p`.
pub fn t_quantile(p: f64, df: f64, prob_tol: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-t_quantile(1.0 - p, df, prob_tol)?);
    }
    if df.is_infinite() {
        return Ok(normal_quantile(p));
    }
    let mut lo = 0.0;
    let mut hi = normal_quantile(p).max(1.0);
    while t_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = t_cdf(x, df)? - p;
        if f.abs() <= 1e-3 * prob_tol {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = t_pdf(x, df)?;
        let newton = x - f / dens;
        x = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Halley step against the CDF
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma::gamma_ur(a, x)
    }
}

/// Upper tail of the chi-squared distribution with `k` degrees of freedom.
pub fn chi_squared_sf(x: f64, k: f64) -> Result<f64> {
    check_df(k)?;
    Ok(regularized_gamma_q(0.5 * k, 0.5 * x))
}
