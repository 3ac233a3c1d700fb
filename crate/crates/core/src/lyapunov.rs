//! Continuous-time Lyapunov equation `A X + X Aᵀ + Q = 0` via real Schur
//! reduction and quasi-triangular back-substitution.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{CcError, Result};
use crate::linalg::{require_shape, require_square, symmetrize, Mat};

/// Diagonal block boundaries of a quasi-upper-triangular matrix.
fn schur_blocks(t: &mut Mat) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n {
            let sub = t[(i + 1, i)];
            let scale = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
            if sub != 0.0 && sub.abs() <= f64::EPSILON * scale {
                t[(i + 1, i)] = 0.0;
            }
            if t[(i + 1, i)] != 0.0 {
                blocks.push((i, 2));
                i += 2;
                continue;
            }
        }
        blocks.push((i, 1));
        i += 1;
    }
    blocks
}

/// Largest real part of the eigenvalues held in the Schur blocks.
fn block_max_real(t: &Mat, blocks: &[(usize, usize)]) -> f64 {
    blocks
        .iter()
        .map(|&(s, size)| {
            if size == 1 {
                t[(s, s)]
            } else {
                let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
                let half_tr = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    half_tr + disc.sqrt()
                } else {
                    half_tr
                }
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A`.
///
/// `Q` need not be definite; the returned `X` is symmetric whenever `Q` is.
pub fn lyapunov_solve(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = require_square(a, "lyapunov_solve: A")?;
    require_shape(q, n, n, "lyapunov_solve: Q")?;
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }

    let (u, mut t) = Schur::new(a.clone()).unpack();
    let blocks = schur_blocks(&mut t);
    let max_real = block_max_real(&t, &blocks);
    if !(max_real < 0.0) {
        return Err(CcError::UnstableGenerator { max_real });
    }

    // T Y + Y Tᵀ = -Uᵀ Q U with Y = Uᵀ X U.
    let c = -(u.transpose() * q * &u);
    let mut y = Mat::zeros(n, n);
    let a_scale = a.norm().max(f64::MIN_POSITIVE);
    let mut worst_sep = f64::INFINITY;

    for bi in (0..blocks.len()).rev() {
        let (ri, pi) = blocks[bi];
        for bj in (0..blocks.len()).rev() {
            let (rj, qj) = blocks[bj];
            if bj > bi {
                let blk = y.view((rj, ri), (qj, pi)).transpose();
                y.view_mut((ri, rj), (pi, qj)).copy_from(&blk);
                continue;
            }
            let mut rhs: Mat = c.view((ri, rj), (pi, qj)).into_owned();
            // - Σ_{k>i} T_ik Y_kj
            let tail_i = ri + pi;
            if tail_i < n {
                rhs -= t.view((ri, tail_i), (pi, n - tail_i)) * y.view((tail_i, rj), (n - tail_i, qj));
            }
            // - Σ_{l>j} Y_il T_jlᵀ
            let tail_j = rj + qj;
            if tail_j < n {
                rhs -= y.view((ri, tail_j), (pi, n - tail_j))
                    * t.view((rj, tail_j), (qj, n - tail_j)).transpose();
            }
            let tii = t.view((ri, ri), (pi, pi)).into_owned();
            let tjj = t.view((rj, rj), (qj, qj)).into_owned();
            let (blk, sep) = small_sylvester(&tii, &tjj, &rhs)?;
            worst_sep = worst_sep.min(sep);
            y.view_mut((ri, rj), (pi, qj)).copy_from(&blk);
        }
    }

    let condition = a_scale / worst_sep;
    if !(condition < 1e14) {
        return Err(CcError::IllConditioned { condition });
    }

    let x = &u * y * u.transpose();
    Ok(symmetrize(&x))
}

/// Solves `P Y + Y Rᵀ = S` for blocks of size at most two. Returns the
/// solution and the smallest singular value of the Kronecker system.
fn small_sylvester(p: &Mat, r: &Mat, s: &Mat) -> Result<(Mat, f64)> {
    let (m, k) = (p.nrows(), r.nrows());
    let dim = m * k;
    let sys: DMatrix<f64> = DMatrix::identity(k, k).kronecker(p) + r.kronecker(&DMatrix::identity(m, m));
    let sep = if dim == 1 {
        sys[(0, 0)].abs()
    } else {
        sys.clone().singular_values().min()
    };
    if sep == 0.0 {
        return Err(CcError::IllConditioned { condition: f64::INFINITY });
    }
    let rhs = DVector::from_column_slice(s.as_slice());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or(CcError::IllConditioned { condition: f64::INFINITY })?;
    Ok((Mat::from_column_slice(m, k, sol.as_slice()), sep))
}

/// Dense Kronecker-vectorized solve of `A X + X Aᵀ + Q = 0`; O(n⁶), for cross-checks.
pub fn lyapunov_solve_dense(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = require_square(a, "lyapunov_solve_dense: A")?;
    require_shape(q, n, n, "lyapunov_solve_dense: Q")?;
    let eye = Mat::identity(n, n);
    let sys = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = sys
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(CcError::IllConditioned { condition: f64::INFINITY })?;
    Ok(symmetrize(&Mat::from_column_slice(n, n, sol.as_slice())))
}

/// Frobenius norm of `A X + X Aᵀ + Q`.
pub fn lyapunov_residual(a: &Mat, x: &Mat, q: &Mat) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}
