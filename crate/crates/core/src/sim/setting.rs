use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ErrorDistribution;
use crate::data::AncovaData;
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;
use crate::rng::mix;

/// Whether covariates are redrawn for every simulated dataset or drawn once
/// per cell and held fixed across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateMode {
    Redraw,
    Fixed,
}

/// One cell of a simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub label: String,
    /// Base group sizes; `m` is added to both.
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub distribution: ErrorDistribution,
    pub b: [f64; 2],
    pub p: Vec<f64>,
    pub covariate_means: Vec<f64>,
    pub covariate_sd: f64,
    pub covariate_mode: CovariateMode,
}

impl SimSetting {
    /// The five reference settings: group sizes and variances
    /// (10,10;1,1), (10,20;1,1), (10,10;1,3), (10,20;1,3), (20,10;1,3),
    /// with three normal covariates of means 9, 7, 5.
    pub fn preset(k: usize) -> Result<Self> {
        let (n1, n2, s2) = match k {
            1 => (10, 10, 1.0),
            2 => (10, 20, 1.0),
            3 => (10, 10, 3.0),
            4 => (10, 20, 3.0),
            5 => (20, 10, 3.0),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown setting {k}; presets are 1 to 5"
                )))
            }
        };
        Ok(SimSetting {
            label: format!("setting{k}"),
            n1,
            n2,
            m: 0,
            sigma1_sq: 1.0,
            sigma2_sq: s2,
            distribution: ErrorDistribution::Normal,
            b: [10.0, 10.0],
            p: vec![1.0, 0.6, 0.7],
            covariate_means: vec![9.0, 7.0, 5.0],
            covariate_sd: 1.0,
            covariate_mode: CovariateMode::Redraw,
        })
    }

    pub fn presets() -> Vec<Self> {
        (1..=5)
            .map(|k| Self::preset(k).expect("valid preset"))
            .collect()
    }

    pub fn with_distribution(mut self, d: ErrorDistribution) -> Self {
        self.distribution = d;
        self
    }

    pub fn with_increment(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    /// Sets `b = (b1, b1 + delta)`.
    pub fn with_shift(mut self, delta: f64) -> Self {
        self.b[1] = self.b[0] + delta;
        self
    }

    pub fn with_slopes(mut self, p: Vec<f64>) -> Self {
        self.p = p;
        self
    }

    /// Actual group sizes `(n1 + m, n2 + m)`.
    pub fn sizes(&self) -> (usize, usize) {
        (self.n1 + self.m, self.n2 + self.m)
    }

    pub fn n_covariates(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n1, n2) = self.sizes();
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidInput(
                "simulated groups need at least 2 observations".into(),
            ));
        }
        if self.covariate_means.len() != self.p.len() {
            return Err(Error::InvalidInput(format!(
                "{} covariate means for {} slopes",
                self.covariate_means.len(),
                self.p.len()
            )));
        }
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !nonneg(self.sigma1_sq) || !nonneg(self.sigma2_sq) {
            return Err(Error::InvalidInput(
                "error variances must be nonnegative".into(),
            ));
        }
        if !(self.covariate_sd > 0.0 && self.covariate_sd.is_finite()) {
            return Err(Error::InvalidInput("covariate sd must be positive".into()));
        }
        if self
            .b
            .iter()
            .chain(&self.p)
            .chain(&self.covariate_means)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("simulation parameters"));
        }
        Ok(())
    }

    /// Identifies the random streams of this cell. Mean parameters (`b`, `p`)
    /// are excluded, so cells that differ only in the treatment shift reuse the
    /// same errors and covariates.
    pub fn stream_key(&self) -> u64 {
        let (n1, n2) = self.sizes();
        let mut words = vec![
            n1 as u64,
            n2 as u64,
            self.sigma1_sq.to_bits(),
            self.sigma2_sq.to_bits(),
            self.distribution.code(),
            self.covariate_sd.to_bits(),
            self.covariate_mode as u64,
        ];
        words.extend(self.covariate_means.iter().map(|m| m.to_bits()));
        mix(&words)
    }
}

/// `N x L` matrix of independent normal covariates.
pub fn draw_covariates<R: Rng + ?Sized>(setting: &SimSetting, rng: &mut R) -> RealMatrix {
    let (n1, n2) = setting.sizes();
    let l = setting.n_covariates();
    let mut m = RealMatrix::zeros(n1 + n2, l);
    for j in 0..n1 + n2 {
        for k in 0..l {
            let z: f64 = StandardNormal.sample(rng);
            m[(j, k)] = setting.covariate_means[k] + setting.covariate_sd * z;
        }
    }
    m
}

/// Responses `b_g + M_j p + sigma_g e_j` for given covariates.
pub fn generate_with_covariates<R: Rng + ?Sized>(
    setting: &SimSetting,
    covariates: RealMatrix,
    rng: &mut R,
) -> Result<AncovaData> {
    let (n1, n2) = setting.sizes();
    let sd = [setting.sigma1_sq.sqrt(), setting.sigma2_sq.sqrt()];
    let y: Vec<f64> = (0..n1 + n2)
        .map(|j| {
            let g = usize::from(j >= n1);
            let lin: f64 = setting
                .p
                .iter()
                .enumerate()
                .map(|(k, p)| p * covariates[(j, k)])
                .sum();
            setting.b[g] + lin + sd[g] * setting.distribution.sample(rng)
        })
        .collect();
    AncovaData::from_groups(&y[..n1], &y[n1..], covariates)
}

pub fn generate_dataset<R: Rng + ?Sized>(setting: &SimSetting, rng: &mut R) -> Result<AncovaData> {
    setting.validate()?;
    let m = draw_covariates(setting, rng);
    generate_with_covariates(setting, m, rng)
}
