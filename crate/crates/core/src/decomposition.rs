//! Signature analysis of the input correlation structure `Z` and its
//! factorization `Z = BHᵀ + HBᵀ` with the fewest input channels.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{CcError, Result};
use crate::linalg::{numerical_rank, spectral_norm, symmetrize, to_rows, Mat};
use crate::lyapunov::lyapunov_residual;

/// Default relative cut between zero and nonzero eigenvalues of `Z`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Inertia `(π, ν, δ)` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signature {
    pub pi: usize,
    pub nu: usize,
    pub delta: usize,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Relative tolerance requested.
    pub zero_tol: f64,
    /// Absolute cut actually applied, `zero_tol·‖Z‖₂`.
    pub cut: f64,
    /// Eigenvalues within a factor 10 of the cut on either side.
    pub near_cut: Vec<f64>,
}

impl Signature {
    pub fn n(&self) -> usize {
        self.pi + self.nu + self.delta
    }

    /// Minimal channel count `max(π, ν)`.
    pub fn channels(&self) -> usize {
        self.pi.max(self.nu)
    }

    /// Ratio of the smallest kept to the largest discarded `|λ|`, or `None`
    /// when one side is empty.
    pub fn gap_ratio(&self) -> Option<f64> {
        let mut mags: Vec<f64> = self.eigenvalues.iter().map(|l| l.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let kept = self.pi + self.nu;
        if kept == 0 || kept == mags.len() {
            return None;
        }
        Some(mags[kept - 1] / mags[kept])
    }
}

pub fn signature(z: &Mat, zero_tol: f64) -> Signature {
    let eig = symmetrize(z).symmetric_eigenvalues();
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let cut = zero_tol * ev.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let pi = ev.iter().filter(|&&l| l > cut).count();
    let nu = ev.iter().filter(|&&l| l < -cut).count();
    let near_cut = ev
        .iter()
        .copied()
        .filter(|l| cut > 0.0 && l.abs() >= cut / 10.0 && l.abs() <= cut * 10.0)
        .collect();
    Signature {
        pi,
        nu,
        delta: ev.len() - pi - nu,
        eigenvalues: ev,
        zero_tol,
        cut,
        near_cut,
    }
}

/// Congruence `T` with `T Z Tᵀ = 2 diag(I_π, −I_ν, 0)` and its inverse.
#[derive(Debug, Clone)]
pub struct Congruence {
    pub t: Mat,
    pub t_inv: Mat,
    pub signature: Signature,
}

pub fn congruence_to_canonical(z: &Mat, zero_tol: f64) -> Congruence {
    let n = z.nrows();
    let sig = signature(z, zero_tol);
    let eig = SymmetricEigen::new(symmetrize(z));
    let cut = sig.cut;
    let lam = &eig.eigenvalues;
    let mut pos: Vec<usize> = (0..n).filter(|&i| lam[i] > cut).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| lam[i] < -cut).collect();
    let zero: Vec<usize> = (0..n).filter(|&i| lam[i].abs() <= cut).collect();
    pos.sort_by(|&i, &j| lam[j].total_cmp(&lam[i]));
    neg.sort_by(|&i, &j| lam[i].total_cmp(&lam[j]));
    let order: Vec<usize> = pos.into_iter().chain(neg).chain(zero).collect();

    let mut t = Mat::zeros(n, n);
    let mut t_inv = Mat::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        let s = if lam[i].abs() > cut { (2.0 / lam[i].abs()).sqrt() } else { 1.0 };
        let u = eig.eigenvectors.column(i);
        t.row_mut(row).copy_from(&(u.transpose() * s));
        t_inv.column_mut(row).copy_from(&(u / s));
    }
    Congruence { t, t_inv, signature: sig }
}

/// `Z = BHᵀ + HBᵀ` with `m = max(π, ν)` columns.
#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    pub t: Mat,
    pub b: Mat,
    pub h: Mat,
    pub signature: Signature,
    /// `‖BHᵀ + HBᵀ − Z‖_F / ‖Z‖_F`.
    pub reconstruction_error: f64,
    /// `‖TZTᵀ − Ẑ‖_F / ‖Z‖_F`.
    pub canonical_error: f64,
}

impl ChannelDecomposition {
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

/// Canonical factors `(B̂, Ĥ)` for inertia `(π, ν)` in dimension `n`.
pub fn canonical_factors(n: usize, pi: usize, nu: usize) -> (Mat, Mat) {
    let m = pi.max(nu);
    let mut bh = Mat::zeros(n, m);
    let mut hh = Mat::zeros(n, m);
    if pi <= nu {
        // Rows: [π positive | π negative paired | ν−π negative | zero].
        for i in 0..pi {
            bh[(i, i)] = 1.0;
            hh[(i, i)] = 1.0;
            bh[(pi + i, i)] = 1.0;
            hh[(pi + i, i)] = -1.0;
        }
        for i in 0..nu - pi {
            bh[(2 * pi + i, pi + i)] = 1.0;
            hh[(2 * pi + i, pi + i)] = -1.0;
        }
    } else {
        // Rows: [π−ν positive | ν positive paired | ν negative | zero].
        let d = pi - nu;
        for i in 0..d {
            bh[(i, i)] = 1.0;
            hh[(i, i)] = 1.0;
        }
        for i in 0..nu {
            bh[(d + i, d + i)] = 1.0;
            hh[(d + i, d + i)] = 1.0;
            bh[(pi + i, d + i)] = 1.0;
            hh[(pi + i, d + i)] = -1.0;
        }
    }
    (bh, hh)
}

pub fn factor_channels(z: &Mat, zero_tol: f64) -> Result<ChannelDecomposition> {
    let n = z.nrows();
    let zs = symmetrize(z);
    let cong = congruence_to_canonical(&zs, zero_tol);
    let sig = cong.signature.clone();
    if sig.pi + sig.nu == 0 {
        return Err(CcError::NothingToFactor);
    }
    let (bh, hh) = canonical_factors(n, sig.pi, sig.nu);
    let b = &cong.t_inv * bh;
    let h = &cong.t_inv * hh;
    let znorm = zs.norm();
    let reconstruction_error = (&b * h.transpose() + &h * b.transpose() - &zs).norm() / znorm;

    let mut canon = Mat::zeros(n, n);
    for i in 0..sig.pi {
        canon[(i, i)] = 2.0;
    }
    for i in sig.pi..sig.pi + sig.nu {
        canon[(i, i)] = -2.0;
    }
    // Eigenvalues below the cut stay in the zero block and count as error.
    let canonical_error = (&cong.t * &zs * cong.t.transpose() - &canon).norm() / znorm;

    Ok(ChannelDecomposition {
        t: cong.t,
        b,
        h,
        signature: sig,
        reconstruction_error,
        canonical_error,
    })
}

/// Default rank cut for `A − λI`: `1e−8·max(1, σ_max(A))`.
pub fn default_multiplicity_tol(a: &Mat) -> f64 {
    1e-8 * spectral_norm(a).max(1.0)
}

/// Largest geometric multiplicity among the eigenvalues of `A`.
pub fn geometric_multiplicity_bound(a: &Mat, rank_tol: Option<f64>) -> usize {
    let n = a.nrows();
    if n == 0 {
        return 0;
    }
    let tol = rank_tol.unwrap_or_else(|| default_multiplicity_tol(a));
    let eigs = a.complex_eigenvalues();
    let scale = spectral_norm(a).max(1.0);
    // Cluster nearly equal eigenvalues so each is tested once.
    let mut reps: Vec<nalgebra::Complex<f64>> = Vec::new();
    for l in eigs.iter() {
        if l.im < 0.0 {
            continue;
        }
        if !reps.iter().any(|r| (r - l).norm() <= 1e-6 * scale) {
            reps.push(*l);
        }
    }
    let mut best = 0;
    for l in reps {
        // Real embedding of A − λI; its rank is twice the complex rank.
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let re = a - Mat::identity(n, n) * l.re;
        let im = Mat::identity(n, n) * l.im;
        m.view_mut((0, 0), (n, n)).copy_from(&re);
        m.view_mut((n, n), (n, n)).copy_from(&re);
        m.view_mut((0, n), (n, n)).copy_from(&im);
        m.view_mut((n, 0), (n, n)).copy_from(&(-im));
        let rank = numerical_rank(&m, Some(tol));
        let mult = n - rank.div_ceil(2).min(n);
        best = best.max(mult);
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct SignatureBounds {
    pub pi: usize,
    pub nu: usize,
    pub mu_a: usize,
    pub m: usize,
    /// `0 ≤ ν(Z) ≤ m`.
    pub nu_bound_holds: bool,
    /// `μ(A) ≤ π(Z) ≤ m`.
    pub pi_bound_holds: bool,
    pub lyapunov_residual: f64,
}

/// Default relative tolerance on `‖AX + XAᵀ + Z‖_F` for [`check_signature_bounds`].
pub const BOUNDS_RESIDUAL_TOL: f64 = 1e-6;

/// Checks the inertia bounds implied by `AX + XAᵀ = −Z` with `m` inputs.
pub fn check_signature_bounds(
    a: &Mat,
    x: &Mat,
    z: &Mat,
    m: usize,
    zero_tol: f64,
    residual_tol: f64,
) -> Result<SignatureBounds> {
    if nalgebra::Cholesky::new(symmetrize(x)).is_none() {
        return Err(CcError::NotPositiveDefinite("X"));
    }
    let residual = lyapunov_residual(a, x, z);
    let scale = 2.0 * a.norm() * x.norm() + z.norm();
    if residual > residual_tol * scale {
        return Err(CcError::LyapunovResidual {
            residual: residual / scale,
        });
    }
    let sig = signature(z, zero_tol);
    let mu_a = geometric_multiplicity_bound(a, None);
    Ok(SignatureBounds {
        pi: sig.pi,
        nu: sig.nu,
        mu_a,
        m,
        nu_bound_holds: sig.nu <= m,
        pi_bound_holds: mu_a <= sig.pi && sig.pi <= m,
        lyapunov_residual: residual / scale,
    })
}

/// JSON export of a decomposition.
#[derive(Debug, Serialize)]
pub struct DecompositionExport {
    pub signature: Signature,
    pub m: usize,
    pub rank_b: usize,
    pub rank_h: usize,
    /// Singular values of `Z` in descending order.
    pub singular_values: Vec<f64>,
    pub gap_ratio: Option<f64>,
    pub reconstruction_error: f64,
    pub canonical_error: f64,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
}

impl DecompositionExport {
    pub fn new(dec: &ChannelDecomposition) -> Self {
        let mut sv: Vec<f64> = dec.signature.eigenvalues.iter().map(|l| l.abs()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Self {
            signature: dec.signature.clone(),
            m: dec.m(),
            rank_b: numerical_rank(&dec.b, None),
            rank_h: numerical_rank(&dec.h, None),
            singular_values: sv,
            gap_ratio: dec.signature.gap_ratio(),
            reconstruction_error: dec.reconstruction_error,
            canonical_error: dec.canonical_error,
            t: to_rows(&dec.t),
            b: to_rows(&dec.b),
            h: to_rows(&dec.h),
        }
    }
}
