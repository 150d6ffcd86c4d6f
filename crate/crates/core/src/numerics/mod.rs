//! Dense linear algebra and probability special functions used by the estimators.

mod linalg;
mod special;

pub use linalg::{
    check_finite, hat_diagonals, matrix_rank, orth_complement_projector, pseudo_inverse, RealMatrix,
};
pub use special::{
    chi_squared_sf, ln_gamma, normal_cdf, normal_quantile, regularized_gamma_q,
    regularized_incomplete_beta, t_cdf, t_pdf, t_quantile, t_sf,
};

use crate::error::{Error, Result};

/// Numerical tolerances shared by the linear algebra and distribution routines.
///
/// `rank_tol` is a cutoff relative to the largest singular value. When it is
/// `None` the cutoff is `max(rows, cols) * f64::EPSILON`, computed per matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rank_tol: Option<f64>,
    pub prob_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_tol: None,
            prob_tol: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(rank_tol: Option<f64>, prob_tol: f64) -> Result<Self> {
        if let Some(r) = rank_tol {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "rank tolerance must be positive, got {r}"
                )));
            }
        }
        if !(prob_tol > 0.0 && prob_tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "probability tolerance must be positive, got {prob_tol}"
            )));
        }
        Ok(Tolerance { rank_tol, prob_tol })
    }

    /// Relative singular-value cutoff for a `rows x cols` matrix.
    pub fn relative_cutoff(&self, rows: usize, cols: usize) -> f64 {
        self.rank_tol
            .unwrap_or_else(|| rows.max(cols).max(1) as f64 * f64::EPSILON)
    }
}
