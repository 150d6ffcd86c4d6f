use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Error distributions standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorDistribution {
    Normal,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// `(X - 7) / sqrt(14)` with `X ~ chi^2_7`.
    Chisq7,
}

const CHISQ_DF: f64 = 7.0;

impl ErrorDistribution {
    pub const ALL: [ErrorDistribution; 3] = [
        ErrorDistribution::Normal,
        ErrorDistribution::Uniform,
        ErrorDistribution::Chisq7,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorDistribution::Normal => "normal",
            ErrorDistribution::Uniform => "uniform",
            ErrorDistribution::Chisq7 => "chisq7",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "normal" => Some(ErrorDistribution::Normal),
            "uniform" => Some(ErrorDistribution::Uniform),
            "chisq7" | "chisq" | "chi2" => Some(ErrorDistribution::Chisq7),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            ErrorDistribution::Normal => 1,
            ErrorDistribution::Uniform => 2,
            ErrorDistribution::Chisq7 => 3,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorDistribution::Normal => StandardNormal.sample(rng),
            ErrorDistribution::Uniform => (rng.random::<f64>() - 0.5) * 12f64.sqrt(),
            ErrorDistribution::Chisq7 => {
                let x: f64 = ChiSquared::new(CHISQ_DF).expect("positive df").sample(rng);
                (x - CHISQ_DF) / (2.0 * CHISQ_DF).sqrt()
            }
        }
    }

    /// Third standardized moment.
    pub fn skewness(self) -> f64 {
        match self {
            ErrorDistribution::Normal | ErrorDistribution::Uniform => 0.0,
            ErrorDistribution::Chisq7 => (8.0 / CHISQ_DF).sqrt(),
        }
    }

    /// Fourth standardized moment (3 for the normal).
    pub fn kurtosis(self) -> f64 {
        match self {
            ErrorDistribution::Normal => 3.0,
            ErrorDistribution::Uniform => 1.8,
            ErrorDistribution::Chisq7 => 3.0 + 12.0 / CHISQ_DF,
        }
    }
}
