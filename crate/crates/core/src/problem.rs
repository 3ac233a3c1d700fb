//! Problem data: the stable linear model, partially observed output
//! correlations, the mass-spring-damper benchmark, and the structural
//! feasibility check on state covariances.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::linalg::{
    asymmetry, from_rows, max_real_eigenvalue, numerical_rank, require_shape, require_square,
    spectral_norm, symmetrize, to_rows, Mat,
};
use crate::lyapunov::lyapunov_solve;

/// Maximum asymmetry tolerated when loading symmetric data.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Continuous-time model `ẋ = A x + B u`, `y = C x` with Hurwitz `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    a: Mat,
    c: Mat,
}

impl LtiModel {
    pub fn new(a: Mat, c: Mat) -> Result<Self> {
        let n = require_square(&a, "LtiModel: A")?;
        if n == 0 {
            return Err(CcError::InvalidInput("model needs at least one state".into()));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(CcError::DimensionMismatch {
                context: "LtiModel: C",
                expected: format!("p x {n}"),
                got: format!("{}x{}", c.nrows(), c.ncols()),
            });
        }
        let max_real = max_real_eigenvalue(&a);
        if !(max_real < 0.0) {
            return Err(CcError::UnstableGenerator { max_real });
        }
        Ok(Self { a, c })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }
}

/// Observed output correlations `G` and the binary mask `E` of available entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceData {
    g: Mat,
    e: Mat,
}

impl CovarianceData {
    /// Validates symmetry of both matrices, binary entries of `E`, and that `G`
    /// vanishes where `E` does. `G` is symmetrized after the check.
    pub fn new(g: Mat, e: Mat) -> Result<Self> {
        let p = require_square(&e, "CovarianceData: E")?;
        require_shape(&g, p, p, "CovarianceData: G")?;
        if e.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(CcError::InvalidInput("mask E must have entries in {0, 1}".into()));
        }
        if asymmetry(&e) != 0.0 {
            return Err(CcError::InvalidInput("mask E must be symmetric".into()));
        }
        let skew = asymmetry(&g);
        if skew > SYMMETRY_TOL {
            return Err(CcError::InvalidInput(format!("G is not symmetric (max asymmetry {skew:e})")));
        }
        if g.iter().zip(e.iter()).any(|(&gv, &ev)| ev == 0.0 && gv != 0.0) {
            return Err(CcError::InvalidInput("G must be zero where E is zero".into()));
        }
        Ok(Self { g: symmetrize(&g), e })
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn e(&self) -> &Mat {
        &self.e
    }

    pub fn observed(&self) -> usize {
        self.e.iter().filter(|&&v| v == 1.0).count()
    }
}

/// Input to the covariance-completion problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub model: LtiModel,
    pub data: CovarianceData,
    pub gamma: f64,
}

impl ProblemInstance {
    pub fn new(model: LtiModel, data: CovarianceData, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(CcError::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if data.g().nrows() != model.p() {
            return Err(CcError::DimensionMismatch {
                context: "ProblemInstance: G",
                expected: format!("{0}x{0}", model.p()),
                got: format!("{0}x{0}", data.g().nrows()),
            });
        }
        Ok(Self { model, data, gamma })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.model.clone(), self.data.clone(), gamma)
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.model.n(),
            p: self.model.p(),
            a: to_rows(self.model.a()),
            c: to_rows(self.model.c()),
            e: to_rows(self.data.e()),
            g: to_rows(self.data.g()),
            gamma: self.gamma,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|source| CcError::Json {
            path: "<instance>".into(),
            source,
        })?;
        file.into_instance()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CcError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: InstanceFile = serde_json::from_str(&text).map_err(|source| CcError::Json {
            path: path.display().to_string(),
            source,
        })?;
        file.into_instance()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| CcError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// On-disk instance layout; matrices are row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<ProblemInstance> {
        let a = from_rows(&self.a)?;
        let c = from_rows(&self.c)?;
        let e = from_rows(&self.e)?;
        let g = from_rows(&self.g)?;
        require_shape(&a, self.n, self.n, "instance: A")?;
        require_shape(&c, self.p, self.n, "instance: C")?;
        require_shape(&e, self.p, self.p, "instance: E")?;
        require_shape(&g, self.p, self.p, "instance: G")?;
        ProblemInstance::new(LtiModel::new(a, c)?, CovarianceData::new(g, e)?, self.gamma)
    }
}

/// Mass-spring-damper benchmark with its exact state covariance.
#[derive(Debug, Clone)]
pub struct MsdGroundTruth {
    pub instance: ProblemInstance,
    /// State covariance of the masses, `2N x 2N`.
    pub sigma_xx: Mat,
    /// Covariance of the filter-augmented system, `3N x 3N`.
    pub sigma_full: Mat,
    pub masses: usize,
}

/// Tridiagonal Toeplitz stiffness matrix with 2 on the diagonal and -1 off it.
pub fn stiffness(masses: usize) -> Mat {
    Mat::from_fn(masses, masses, |i, j| {
        if i == j {
            2.0
        } else if i.abs_diff(j) == 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `A = [[0, I], [-T, -I]]` for positions stacked over velocities.
pub fn msd_generator(masses: usize) -> Mat {
    let n = masses;
    let mut a = Mat::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-stiffness(n)));
    a.view_mut((n, n), (n, n)).copy_from(&(-Mat::identity(n, n)));
    a
}

/// One-point correlation mask: diagonals of the position, velocity and
/// position-velocity blocks.
pub fn msd_one_point_mask(masses: usize) -> Mat {
    let n = masses;
    let mut e = Mat::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        e[(i, i)] = 1.0;
    }
    for i in 0..n {
        e[(i, i + n)] = 1.0;
        e[(i + n, i)] = 1.0;
    }
    e
}

/// Builds the MSD instance driven by low-pass filtered white noise.
///
/// `mask` overrides the one-point pattern; it must be a symmetric binary
/// `2N x 2N` matrix.
pub fn gen_msd(masses: usize, gamma: f64, mask: Option<Mat>) -> Result<MsdGroundTruth> {
    if masses == 0 {
        return Err(CcError::InvalidInput("number of masses must be positive".into()));
    }
    let n = masses;
    let a = msd_generator(n);
    // Augmented with the filter state ζ: ζ̇ = -ζ + d.
    let mut a_aug = Mat::zeros(3 * n, 3 * n);
    a_aug.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&a);
    a_aug.view_mut((n, 2 * n), (n, n)).fill_with_identity();
    a_aug.view_mut((2 * n, 2 * n), (n, n)).copy_from(&(-Mat::identity(n, n)));
    let mut b_aug = Mat::zeros(3 * n, n);
    b_aug.view_mut((2 * n, 0), (n, n)).fill_with_identity();

    let sigma_full = lyapunov_solve(&a_aug, &(&b_aug * b_aug.transpose()))?;
    let sigma_xx = symmetrize(&sigma_full.view((0, 0), (2 * n, 2 * n)).into_owned());

    let e = match mask {
        Some(m) => {
            require_shape(&m, 2 * n, 2 * n, "gen_msd: mask")?;
            m
        }
        None => msd_one_point_mask(n),
    };
    let g = sigma_xx.component_mul(&e);
    let model = LtiModel::new(a, Mat::identity(2 * n, 2 * n))?;
    let instance = ProblemInstance::new(model, CovarianceData::new(g, e)?, gamma)?;
    Ok(MsdGroundTruth {
        instance,
        sigma_xx,
        sigma_full,
        masses: n,
    })
}

/// Outcome of the structural rank test on a candidate state covariance.
#[derive(Debug, Clone)]
pub struct RankReport {
    /// rank `[[AX + XAᵀ, B], [Bᵀ, 0]]`.
    pub rank_structured: usize,
    /// rank `[[0, B], [Bᵀ, 0]]`.
    pub rank_reference: usize,
    pub consistent: bool,
    /// Least-squares solution of `AX + XAᵀ = -(BHᵀ + HBᵀ)`.
    pub h: Mat,
    pub h_residual: f64,
    pub rank_tol: f64,
}

/// Relative rank cut used by [`validate_covariance`] when none is given.
pub const STRUCTURAL_RANK_TOL: f64 = 1e-9;

/// Orthonormal bases of the column space of `B` and of its complement.
pub(crate) fn range_split(b: &Mat) -> (Mat, Mat, usize) {
    let n = b.nrows();
    if b.ncols() == 0 || b.norm() == 0.0 {
        return (Mat::zeros(n, 0), Mat::identity(n, n), 0);
    }
    let rank = numerical_rank(b, None);
    let proj = b * b.transpose();
    let eig = nalgebra::SymmetricEigen::new(symmetrize(&proj));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let q1 = Mat::from_fn(n, rank, |i, k| eig.eigenvectors[(i, order[k])]);
    let q2 = Mat::from_fn(n, n - rank, |i, k| eig.eigenvectors[(i, order[rank + k])]);
    (q1, q2, rank)
}

/// Least-squares `H` minimizing `‖BHᵀ + HBᵀ - Z‖_F` (minimum-norm when `B` is rank deficient).
pub fn least_squares_h(b: &Mat, z: &Mat) -> (Mat, f64) {
    let n = b.nrows();
    let (q1, q2, rank) = range_split(b);
    if rank == 0 {
        return (Mat::zeros(n, b.ncols()), z.norm());
    }
    let q = {
        let mut q = Mat::zeros(n, n);
        q.view_mut((0, 0), (n, rank)).copy_from(&q1);
        q.view_mut((0, rank), (n, n - rank)).copy_from(&q2);
        q
    };
    let zt = q.transpose() * z * &q;
    // Qᵀ B Hᵀ Q = [W; 0] with W = Q1ᵀ B Hᵀ Q.
    let mut w = Mat::zeros(rank, n);
    w.view_mut((0, 0), (rank, rank))
        .copy_from(&(zt.view((0, 0), (rank, rank)) * 0.5));
    if rank < n {
        w.view_mut((0, rank), (rank, n - rank))
            .copy_from(&zt.view((0, rank), (rank, n - rank)));
    }
    let residual = if rank < n {
        zt.view((rank, rank), (n - rank, n - rank)).norm()
    } else {
        0.0
    };
    // Solve (Q1ᵀ B) Hᵀ = W Qᵀ in the minimum-norm sense.
    let coeff = q1.transpose() * b;
    let rhs = w * q.transpose();
    let ht = coeff
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| Mat::zeros(b.ncols(), n));
    (ht.transpose(), residual)
}

/// Checks whether `X ≻ 0` is a steady-state covariance of `ẋ = Ax + Bu` for
/// some stationary input `u`.
pub fn validate_covariance(
    model: &LtiModel,
    x: &Mat,
    b: &Mat,
    rank_tol: Option<f64>,
) -> Result<RankReport> {
    let n = model.n();
    require_shape(x, n, n, "validate_covariance: X")?;
    if b.nrows() != n {
        return Err(CcError::DimensionMismatch {
            context: "validate_covariance: B",
            expected: format!("{n} x m"),
            got: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    if nalgebra::Cholesky::new(symmetrize(x)).is_none() {
        return Err(CcError::NotPositiveDefinite("X"));
    }
    let m = b.ncols();
    let a = model.a();
    let lyap = a * x + x * a.transpose();

    let mut structured = Mat::zeros(n + m, n + m);
    structured.view_mut((0, 0), (n, n)).copy_from(&lyap);
    structured.view_mut((0, n), (n, m)).copy_from(b);
    structured.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
    let mut reference = structured.clone();
    reference.view_mut((0, 0), (n, n)).fill(0.0);

    let rel = rank_tol.unwrap_or(STRUCTURAL_RANK_TOL);
    let tol = rel * spectral_norm(&structured).max(f64::MIN_POSITIVE);
    let rank_structured = numerical_rank(&structured, Some(tol));
    let rank_reference = numerical_rank(&reference, Some(tol));
    let (h, h_residual) = least_squares_h(b, &(-lyap));
    Ok(RankReport {
        rank_structured,
        rank_reference,
        consistent: rank_structured == rank_reference,
        h,
        h_residual,
        rank_tol: tol,
    })
}
