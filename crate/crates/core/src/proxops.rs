//! Spectral operators on symmetric matrices: soft-thresholding, saturation,
//! and the resolvent of the log-det barrier.
//!
//! All three act on the signed eigenvalues of one symmetric
//! eigendecomposition, so `M = sat_τ(M) + shrink_τ(M)` holds in a shared basis.

use nalgebra::{DVector, SymmetricEigen};

use crate::linalg::{symmetrize, Mat};

/// `M = U diag(λ) Uᵀ` with eigenvalues ordered by descending magnitude
/// (ties broken by descending signed value).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub u: Mat,
    pub lambda: DVector<f64>,
}

impl SpectralDecomposition {
    pub fn new(m: &Mat) -> Self {
        let n = m.nrows();
        let eig = SymmetricEigen::new(symmetrize(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (eig.eigenvalues[i], eig.eigenvalues[j]);
            b.abs().total_cmp(&a.abs()).then(b.total_cmp(&a))
        });
        let u = Mat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
        let lambda = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        Self { u, lambda }
    }

    /// `U diag(f(λ)) Uᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mut scaled = self.u.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.lambda[k]);
        }
        symmetrize(&(scaled * self.u.transpose()))
    }

    pub fn reconstruct(&self) -> Mat {
        self.map(|l| l)
    }
}

pub fn shrink_scalar(l: f64, tau: f64) -> f64 {
    l.signum() * (l.abs() - tau).max(0.0)
}

pub fn clamp_scalar(l: f64, tau: f64) -> f64 {
    l.clamp(-tau, tau)
}

/// Minimizer of `τ‖Z‖_* + ½‖Z − M‖²_F` over symmetric `Z`.
pub fn soft_threshold(m: &Mat, tau: f64) -> Mat {
    debug_assert!(tau >= 0.0);
    SpectralDecomposition::new(m).map(|l| shrink_scalar(l, tau))
}

/// Projection onto `{‖Y‖₂ ≤ τ}`: eigenvalues clamped to `[−τ, τ]`.
pub fn saturate(m: &Mat, tau: f64) -> Mat {
    debug_assert!(tau >= 0.0);
    SpectralDecomposition::new(m).map(|l| clamp_scalar(l, tau))
}

/// Both operators from a single decomposition: `(saturate, soft_threshold)`.
pub fn split(m: &Mat, tau: f64) -> (Mat, Mat) {
    let sd = SpectralDecomposition::new(m);
    (sd.map(|l| clamp_scalar(l, tau)), sd.map(|l| shrink_scalar(l, tau)))
}

/// Positive root of `μ g − 1/g = λ`.
pub fn resolvent_scalar(lambda: f64, mu: f64) -> f64 {
    let h = lambda / (2.0 * mu);
    if h >= 0.0 {
        h + (h * h + 1.0 / mu).sqrt()
    } else {
        // Rationalized to avoid cancellation for strongly negative λ.
        (1.0 / mu) / ((h * h + 1.0 / mu).sqrt() - h)
    }
}

/// Unique `X ≻ 0` with `μX − X⁻¹ = R`.
pub fn logdet_resolvent(r: &Mat, mu: f64) -> Mat {
    debug_assert!(mu > 0.0);
    SpectralDecomposition::new(r).map(|l| resolvent_scalar(l, mu))
}

pub fn nuclear_norm_sym(m: &Mat) -> f64 {
    symmetrize(m).symmetric_eigenvalues().iter().map(|l| l.abs()).sum()
}
