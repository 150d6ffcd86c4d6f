use nalgebra::{DMatrix, DVector};

use super::Tolerance;
use crate::error::{Error, Result};

/// Dense real matrix. Column-major storage; indexing is `(row, col)`.
pub type RealMatrix = DMatrix<f64>;

pub fn check_finite(a: &RealMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

struct Decomposition {
    u: RealMatrix,
    singular: DVector<f64>,
    v: RealMatrix,
}

/// Thin SVD `A = U diag(s) V'`, computed by faer (nalgebra's SVD loses
/// accuracy on some rank-deficient inputs).
fn decompose(a: &RealMatrix) -> Result<Decomposition> {
    let (m, n) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| Error::Structural(format!("singular value decomposition failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = m.min(n);
    Ok(Decomposition {
        u: RealMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        singular: DVector::from_fn(k, |i, _| s[i]),
        v: RealMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    })
}

fn absolute_cutoff(a: &RealMatrix, s: &DVector<f64>, tol: &Tolerance) -> f64 {
    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    tol.relative_cutoff(a.nrows(), a.ncols()) * s_max
}

/// Moore-Penrose inverse via the singular value decomposition.
///
/// Singular values at or below `cutoff * s_max` are treated as zero, so the
/// zero matrix maps to the zero matrix.
pub fn pseudo_inverse(a: &RealMatrix, tol: &Tolerance) -> Result<RealMatrix> {
    check_finite(a, "matrix passed to pseudo_inverse")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(RealMatrix::zeros(n, m));
    }
    let d = decompose(a)?;
    let cut = absolute_cutoff(a, &d.singular, tol);
    let mut out = RealMatrix::zeros(n, m);
    for (k, &s) in d.singular.iter().enumerate() {
        if s > cut {
            // out += v_k u_k' / s
            let v = d.v.column(k);
            let u = d.u.column(k);
            out.ger(1.0 / s, &v, &u, 1.0);
        }
    }
    Ok(out)
}

/// Number of singular values above the relative cutoff.
pub fn matrix_rank(a: &RealMatrix, tol: &Tolerance) -> Result<usize> {
    check_finite(a, "matrix passed to matrix_rank")?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = decompose(a)?.singular;
    let cut = absolute_cutoff(a, &s, tol);
    Ok(s.iter().filter(|&&v| v > cut).count())
}

/// `I - X X^+`, the orthogonal projector onto the complement of `col(X)`.
pub fn orth_complement_projector(x: &RealMatrix, tol: &Tolerance) -> Result<RealMatrix> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidInput(
            "projector needs at least one row".into(),
        ));
    }
    let mut q = RealMatrix::identity(n, n);
    if x.ncols() > 0 {
        let hat = x * pseudo_inverse(x, tol)?;
        q -= hat;
    }
    Ok(symmetrize(q))
}

/// Diagonal of the hat matrix `X X^+`.
///
/// Computed from the left singular vectors spanning `col(X)`, which keeps
/// every entry inside `[0, 1]` up to rounding.
pub fn hat_diagonals(x: &RealMatrix, tol: &Tolerance) -> Result<Vec<f64>> {
    check_finite(x, "design passed to hat_diagonals")?;
    let n = x.nrows();
    if x.ncols() == 0 || n == 0 {
        return Ok(vec![0.0; n]);
    }
    let d = decompose(x)?;
    let cut = absolute_cutoff(x, &d.singular, tol);
    let mut h = vec![0.0; n];
    for (k, &s) in d.singular.iter().enumerate() {
        if s > cut {
            for (i, hi) in h.iter_mut().enumerate() {
                *hi += d.u[(i, k)] * d.u[(i, k)];
            }
        }
    }
    Ok(h.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

fn symmetrize(mut q: RealMatrix) -> RealMatrix {
    let n = q.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = avg;
            q[(j, i)] = avg;
        }
    }
    q
}
