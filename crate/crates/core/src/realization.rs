//! Feedback filters that make `ẋ = (A − BK)x + Bw` with white `w` of
//! covariance `Ω` reproduce a prescribed state covariance `X`.

use nalgebra::{Cholesky, Complex};
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::linalg::{is_hurwitz, max_real_eigenvalue, numerical_rank, spectral_norm, spd_inverse, symmetrize, to_rows, Mat};
use crate::problem::range_split;

/// Tolerance on the structural identity `AX + XAᵀ + BHᵀ + HBᵀ = 0`, relative
/// to `2‖A‖‖X‖ + 2‖B‖‖H‖`.
pub const STRUCTURE_TOL: f64 = 1e-6;

/// Relative margin for the Hurwitz test: `max Re λ < −margin·‖Acl‖₂`.
pub const HURWITZ_MARGIN: f64 = 1e-10;

/// Relative tolerance on the part of the covariance constraint outside the range of `B`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FilterRealization {
    pub a: Mat,
    pub b: Mat,
    pub k: Mat,
    pub omega: Mat,
    pub acl: Mat,
    pub x: Mat,
    /// `‖Acl X + X Aclᵀ + BΩBᵀ‖_F / ‖X‖_F`.
    pub closed_loop_residual: f64,
    /// `trace(K X Kᵀ)`.
    pub energy: f64,
}

impl FilterRealization {
    /// Wraps a gain, enforcing the Hurwitz property of the closed loop.
    pub fn new(a: &Mat, x: &Mat, b: &Mat, k: Mat, omega: &Mat) -> Result<Self> {
        let acl = a - b * &k;
        let max_real = max_real_eigenvalue(&acl);
        if !is_hurwitz(&acl, HURWITZ_MARGIN * spectral_norm(&acl)) {
            return Err(CcError::NotHurwitz { max_real });
        }
        let closed_loop_residual = closed_loop_residual(&acl, x, b, omega) / x.norm();
        let energy = (&k * x * k.transpose()).trace();
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            k,
            omega: omega.clone(),
            acl,
            x: x.clone(),
            closed_loop_residual,
            energy,
        })
    }

    /// `BΩBᵀ`.
    pub fn noise_intensity(&self) -> Mat {
        symmetrize(&(&self.b * &self.omega * self.b.transpose()))
    }

    pub fn closed_loop_spectrum(&self) -> Vec<Complex<f64>> {
        self.acl.complex_eigenvalues().iter().copied().collect()
    }

    /// `H′ = −XKᵀ + ½BΩ`, the cross-correlation implied by the gain.
    pub fn implied_h(&self) -> Mat {
        -(&self.x * self.k.transpose()) + &self.b * &self.omega * 0.5
    }
}

/// `‖Acl X + X Aclᵀ + BΩBᵀ‖_F`.
pub fn closed_loop_residual(acl: &Mat, x: &Mat, b: &Mat, omega: &Mat) -> f64 {
    (acl * x + x * acl.transpose() + b * omega * b.transpose()).norm()
}

/// Relative residual of `AX + XAᵀ + BHᵀ + HBᵀ = 0`.
pub fn structure_residual(a: &Mat, x: &Mat, b: &Mat, h: &Mat) -> f64 {
    let r = a * x + x * a.transpose() + b * h.transpose() + h * b.transpose();
    let scale = 2.0 * a.norm() * x.norm() + 2.0 * b.norm() * h.norm();
    r.norm() / scale.max(f64::MIN_POSITIVE)
}

fn spd(m: &Mat, what: &'static str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or(CcError::NotPositiveDefinite(what))
}

fn check_dims(a: &Mat, x: &Mat, b: &Mat, omega: &Mat) -> Result<()> {
    let n = a.nrows();
    crate::linalg::require_shape(x, n, n, "realization: X")?;
    crate::linalg::require_shape(b, n, b.ncols(), "realization: B")?;
    if b.nrows() != n {
        return Err(CcError::DimensionMismatch {
            context: "realization: B",
            expected: format!("{n} x m"),
            got: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    crate::linalg::require_shape(omega, b.ncols(), b.ncols(), "realization: Omega")
}

/// Gain `K = ½ΩBᵀX⁻¹ − HᵀX⁻¹`.
pub fn filter_gain(a: &Mat, x: &Mat, b: &Mat, h: &Mat, omega: &Mat) -> Result<FilterRealization> {
    check_dims(a, x, b, omega)?;
    crate::linalg::require_shape(h, b.nrows(), b.ncols(), "realization: H")?;
    let xc = spd(x, "X")?;
    spd(omega, "Omega")?;
    let residual = structure_residual(a, x, b, h);
    if residual > STRUCTURE_TOL {
        return Err(CcError::InconsistentFactors { residual });
    }
    let xinv = spd_inverse(&xc);
    let kt = &xinv * (b * omega * 0.5 - h);
    FilterRealization::new(a, x, b, kt.transpose(), omega)
}

/// Outcome of [`optimal_gain`] beyond the realization itself.
#[derive(Debug, Clone)]
pub struct OptimalGain {
    pub realization: FilterRealization,
    /// Norm of the skew part of the reduced gradient, relative to the gradient scale.
    pub kkt_residual: f64,
    /// `‖BKX + XKᵀBᵀ − (AX + XAᵀ + BΩBᵀ)‖_F`, relative to the right side.
    pub constraint_residual: f64,
}

/// Least-energy gain: minimizes `trace(KXKᵀ)` subject to
/// `BKX + XKᵀBᵀ = AX + XAᵀ + BΩBᵀ`.
///
/// With `B = Q1 R_B` and `Q = [Q1 Q2]` orthogonal, every feasible `KX`
/// equals `R_B⁻¹ [½R̃11 + W, R̃12] Qᵀ` for skew `W`, where `R̃ = QᵀRQ`;
/// the optimal `W` solves a Sylvester-type equation that diagonalizes.
pub fn optimal_gain(a: &Mat, x: &Mat, b: &Mat, omega: &Mat) -> Result<OptimalGain> {
    check_dims(a, x, b, omega)?;
    let n = a.nrows();
    let m = b.ncols();
    let xc = spd(x, "X")?;
    spd(omega, "Omega")?;
    if m == 0 || numerical_rank(b, None) < m {
        return Err(CcError::InvalidInput("B must have full column rank".into()));
    }
    let (q1, q2, rank) = range_split(b);
    debug_assert_eq!(rank, m);
    let mut q = Mat::zeros(n, n);
    q.view_mut((0, 0), (n, m)).copy_from(&q1);
    q.view_mut((0, m), (n, n - m)).copy_from(&q2);

    let rhs = symmetrize(&(a * x + x * a.transpose() + b * omega * b.transpose()));
    let rt = q.transpose() * &rhs * &q;
    let infeasible = rt.view((m, m), (n - m, n - m)).norm();
    if infeasible > FEASIBILITY_TOL * rhs.norm().max(x.norm()) {
        return Err(CcError::Infeasible { residual: infeasible });
    }

    let rb = q1.transpose() * b;
    let rb_inv = rb
        .clone()
        .try_inverse()
        .ok_or_else(|| CcError::InvalidInput("B must have full column rank".into()))?;
    // S = R_B⁻ᵀ R_B⁻¹, Y = (QᵀXQ)⁻¹.
    let s = symmetrize(&(rb_inv.transpose() * &rb_inv));
    let y = symmetrize(&spd_inverse(&spd(&(q.transpose() * x * &q), "X")?));
    let y11 = y.view((0, 0), (m, m)).into_owned();

    let mut n0 = Mat::zeros(m, n);
    n0.view_mut((0, 0), (m, m)).copy_from(&(rt.view((0, 0), (m, m)) * 0.5));
    n0.view_mut((0, m), (m, n - m)).copy_from(&rt.view((0, m), (m, n - m)));
    let c = &s * &n0 * y.view((0, 0), (n, m));
    let rhs_w = c.transpose() - &c;

    // V with VᵀSV = I and VᵀY11V = D.
    let ls = spd(&s, "S")?;
    let l_inv = ls
        .l()
        .try_inverse()
        .ok_or(CcError::NotPositiveDefinite("S"))?;
    let inner = nalgebra::SymmetricEigen::new(symmetrize(&(&l_inv * &y11 * l_inv.transpose())));
    let v = l_inv.transpose() * &inner.eigenvectors;
    let d = &inner.eigenvalues;
    let rv = v.transpose() * &rhs_w * &v;
    let wp = Mat::from_fn(m, m, |i, j| rv[(i, j)] / (d[i] + d[j]));
    let w = &v * wp * v.transpose();

    let mut nmat = n0;
    {
        let mut blk = nmat.view_mut((0, 0), (m, m));
        blk += &w;
    }
    let kx = &rb_inv * &nmat * q.transpose();
    let xinv = spd_inverse(&xc);
    let k = &kx * &xinv;

    let grad = &s * &nmat * y.view((0, 0), (n, m));
    let skew = (&grad - grad.transpose()) * 0.5;
    let kkt_residual = skew.norm() / grad.norm().max(1.0);
    let lhs = b * &k * x + x * k.transpose() * b.transpose();
    let constraint_residual = (lhs - &rhs).norm() / rhs.norm().max(x.norm());

    let realization = FilterRealization::new(a, x, b, k, omega)?;
    Ok(OptimalGain {
        realization,
        kkt_residual,
        constraint_residual,
    })
}

/// JSON export of a realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationFile {
    pub mode: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Omega")]
    pub omega: Vec<Vec<f64>>,
    #[serde(rename = "Acl")]
    pub acl: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    /// Observation mask of the instance, used when comparing simulations.
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
    /// Closed-loop eigenvalues as `[re, im]` pairs.
    pub spectrum: Vec<[f64; 2]>,
    pub closed_loop_residual: f64,
    pub energy: f64,
    #[serde(default)]
    pub kkt_residual: Option<f64>,
    #[serde(default)]
    pub structure_residual: Option<f64>,
    /// `‖X − X_solver‖_F / ‖X_solver‖_F` when `X` was re-derived from `Z`.
    #[serde(default)]
    pub solver_x_deviation: Option<f64>,
}

impl RealizationFile {
    pub fn new(mode: &str, r: &FilterRealization, e: Option<&Mat>) -> Self {
        Self {
            mode: mode.to_string(),
            a: to_rows(&r.a),
            k: to_rows(&r.k),
            b: to_rows(&r.b),
            omega: to_rows(&r.omega),
            acl: to_rows(&r.acl),
            x: to_rows(&r.x),
            e: e.map(to_rows),
            spectrum: r.closed_loop_spectrum().iter().map(|c| [c.re, c.im]).collect(),
            closed_loop_residual: r.closed_loop_residual,
            energy: r.energy,
            kkt_residual: None,
            structure_residual: None,
            solver_x_deviation: None,
        }
    }

    /// Rebuilds the realization, re-checking its invariants.
    pub fn into_realization(&self) -> Result<FilterRealization> {
        use crate::linalg::from_rows;
        let a = from_rows(&self.a)?;
        let b = from_rows(&self.b)?;
        let k = from_rows(&self.k)?;
        let omega = from_rows(&self.omega)?;
        let x = from_rows(&self.x)?;
        check_dims(&a, &x, &b, &omega)?;
        crate::linalg::require_shape(&k, b.ncols(), a.nrows(), "realization: K")?;
        FilterRealization::new(&a, &x, &b, k, &omega)
    }

    pub fn mask(&self) -> Result<Option<Mat>> {
        self.e.as_ref().map(|rows| crate::linalg::from_rows(rows)).transpose()
    }
}
