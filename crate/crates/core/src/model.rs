//! Two-sample ANCOVA design and least-squares fit.
//!
//! The estimators are linear in the response: `b_hat = D Y` and `p_hat = A Y`
//! with
//!
//! ```text
//! A = (M'QM)^- M'Q = (QM)^+,     Q = I - X X^+
//! D = X^+ (I - M A)
//! ```
//!
//! The Moore-Penrose identity `(QM)^+ = (M'QM)^+ (QM)'` lets `A` be computed
//! from the SVD of the tall matrix `QM` instead of the normal equations.

use serde::{Deserialize, Serialize};

use crate::data::AncovaData;
use crate::error::{Error, Result};
use crate::numerics::{
    matrix_rank, orth_complement_projector, pseudo_inverse, RealMatrix, Tolerance,
};

/// Group design `X = 1_{n1} (+) 1_{n2}` and the covariate matrix `M`.
pub fn build_design(data: &AncovaData) -> (RealMatrix, RealMatrix) {
    let n1 = data.n1();
    let x = RealMatrix::from_fn(
        data.n(),
        2,
        |i, j| {
            if (i < n1) == (j == 0) {
                1.0
            } else {
                0.0
            }
        },
    );
    (x, data.covariates().clone())
}

/// `(X ⋮ M)`, the full regression design with columns `(b1, b2, p1..pL)`.
pub fn full_design(data: &AncovaData) -> RealMatrix {
    let (x, m) = build_design(data);
    let n = data.n();
    let l = m.ncols();
    RealMatrix::from_fn(
        n,
        2 + l,
        |i, j| if j < 2 { x[(i, j)] } else { m[(i, j - 2)] },
    )
}

/// Generating matrices `D` (2 x N) and `A` (L x N).
pub fn generating_matrices(
    x: &RealMatrix,
    m: &RealMatrix,
    tol: &Tolerance,
) -> Result<(RealMatrix, RealMatrix)> {
    if x.nrows() != m.nrows() {
        return Err(Error::InvalidInput(format!(
            "X has {} rows but M has {}",
            x.nrows(),
            m.nrows()
        )));
    }
    let n = x.nrows();
    let x_pinv = pseudo_inverse(x, tol)?;
    if m.ncols() == 0 {
        return Ok((x_pinv, RealMatrix::zeros(0, n)));
    }
    let q = orth_complement_projector(x, tol)?;
    let a = pseudo_inverse(&(q * m), tol)?;
    let residual_maker = RealMatrix::identity(n, n) - m * &a;
    Ok((x_pinv * residual_maker, a))
}

/// `(n1*, n2*)`: group-wise sums of `(d_1j - d_2j)^2`.
pub fn weights_n_star(d: &RealMatrix, n1: usize) -> (f64, f64) {
    let mut w = (0.0, 0.0);
    for j in 0..d.ncols() {
        let diff = d[(0, j)] - d[(1, j)];
        if j < n1 {
            w.0 += diff * diff;
        } else {
            w.1 += diff * diff;
        }
    }
    w
}

/// `(ñ_{1,l}, ñ_{2,l})`: group-wise sums of `a_lj^2` for covariate `l` (1-based).
pub fn weights_n_tilde(a: &RealMatrix, n1: usize, l: usize) -> Result<(f64, f64)> {
    if l == 0 || l > a.nrows() {
        return Err(Error::IndexOutOfRange {
            index: l,
            max: a.nrows(),
        });
    }
    let row = a.row(l - 1);
    let mut w = (0.0, 0.0);
    for (j, v) in row.iter().enumerate() {
        if j < n1 {
            w.0 += v * v;
        } else {
            w.1 += v * v;
        }
    }
    Ok(w)
}

/// Least-squares fit of `Y = Xb + Mp + e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub b_hat: [f64; 2],
    pub p_hat: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub d: RealMatrix,
    #[serde(skip)]
    pub a: RealMatrix,
    pub n_star: (f64, f64),
    pub n_tilde: Vec<(f64, f64)>,
    pub n1: usize,
    /// `r(M)`.
    pub covariate_rank: usize,
    /// False when `r(M) < L`; `p_hat` is then one of many solutions, while
    /// `b_hat[0] - b_hat[1]` stays estimable.
    pub p_identifiable: bool,
}

impl FittedModel {
    /// Adjusted treatment effect `b1 - b2`.
    pub fn delta(&self) -> f64 {
        self.b_hat[0] - self.b_hat[1]
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }
}

pub fn fit(data: &AncovaData, tol: &Tolerance) -> Result<FittedModel> {
    let (x, m) = build_design(data);
    let (d, a) = generating_matrices(&x, &m, tol)?;
    let y = RealMatrix::from_column_slice(data.n(), 1, data.y());
    let b = &d * &y;
    let p = &a * &y;
    let fitted = &x * &b + &m * &p;
    let residuals: Vec<f64> = data
        .y()
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| y - f)
        .collect();

    let n1 = data.n1();
    let l = m.ncols();
    let n_tilde = (1..=l)
        .map(|k| weights_n_tilde(&a, n1, k))
        .collect::<Result<Vec<_>>>()?;
    let covariate_rank = matrix_rank(&m, tol)?;
    Ok(FittedModel {
        b_hat: [b[(0, 0)], b[(1, 0)]],
        p_hat: p.iter().copied().collect(),
        residuals,
        n_star: weights_n_star(&d, n1),
        n_tilde,
        d,
        a,
        n1,
        covariate_rank,
        p_identifiable: covariate_rank == l,
    })
}
