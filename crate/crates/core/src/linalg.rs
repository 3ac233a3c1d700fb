//! Dense linear-algebra helpers shared across the toolkit.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{CcError, Result};

pub type Mat = DMatrix<f64>;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius inner product `trace(AᵀB)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frob(a: &Mat) -> f64 {
    a.norm()
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn require_square(m: &Mat, context: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(CcError::DimensionMismatch {
            context,
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m.nrows())
}

pub fn require_shape(m: &Mat, rows: usize, cols: usize, context: &'static str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(CcError::DimensionMismatch {
            context,
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric matrix together with its log-determinant.
/// Returns `None` when the matrix is not numerically positive definite.
pub fn cholesky_logdet(m: &Mat) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let chol = Cholesky::new(symmetrize(m))?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        logdet += 2.0 * d.ln();
    }
    Some((chol, logdet))
}

/// Inverse of an SPD matrix from its Cholesky factor, symmetrized.
pub fn spd_inverse(chol: &Cholesky<f64, Dyn>) -> Mat {
    symmetrize(&chol.inverse())
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eig_range(m: &Mat) -> (f64, f64) {
    let ev = symmetrize(m).symmetric_eigenvalues();
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Spectral norm of a symmetric matrix: largest absolute eigenvalue.
pub fn sym_spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (lo, hi) = sym_eig_range(m);
    lo.abs().max(hi.abs())
}

/// Spectral norm of a general matrix.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Default numerical-rank cut: `max(rows, cols) · ε · σ_max`.
pub fn default_rank_tol(m: &Mat, sigma_max: f64) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max
}

/// Numerical rank; singular values strictly above `tol` count. `None` uses the default cut.
pub fn numerical_rank(m: &Mat, tol: Option<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let tol = tol.unwrap_or_else(|| default_rank_tol(m, smax));
    sv.iter().filter(|&&s| s > tol).count()
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn max_real_eigenvalue(a: &Mat) -> f64 {
    if a.is_empty() {
        return f64::NEG_INFINITY;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Hurwitz test with margin: `max Re(λ) < -margin`.
pub fn is_hurwitz(a: &Mat, margin: f64) -> bool {
    max_real_eigenvalue(a) < -margin
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec_of(m: &Mat) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<f64>, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

/// Matrix exponential (scaling and squaring Padé).
pub fn expm(m: &Mat) -> Mat {
    m.exp()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(CcError::InvalidInput("ragged matrix rows".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CcError::InvalidInput("non-finite matrix entry".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
