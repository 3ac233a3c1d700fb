//! The constraint operators of the completion problem,
//!
//! ```text
//! A1(X) = A X + X Aᵀ          A1†(Y) = Aᵀ Y + Y A
//! A2(X) = (C X Cᵀ) ∘ E        A2†(Y) = Cᵀ (E ∘ Y) C
//! ```
//!
//! their spectral norms, and the dual objective
//! `J_d(Y) = logdet(A1†(Y1) + A2†(Y2)) − ⟨G, Y2⟩ + n` with its gradient.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Cholesky, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CcError, Result};
use crate::linalg::{cholesky_logdet, inner, require_shape, spd_inverse, symmetrize, Mat};
use crate::problem::LtiModel;

/// Seed of the power-iteration start vector.
pub const POWER_SEED: u64 = 0x5EED;
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

/// Dual variables `(Y1, Y2)` attached to the two equality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub y1: Mat,
    pub y2: Mat,
}

impl DualPoint {
    pub fn new(y1: Mat, y2: Mat) -> Self {
        Self {
            y1: symmetrize(&y1),
            y2: symmetrize(&y2),
        }
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            y1: Mat::zeros(n, n),
            y2: Mat::zeros(p, p),
        }
    }

    pub fn dot(&self, other: &DualPoint) -> f64 {
        inner(&self.y1, &other.y1) + inner(&self.y2, &other.y2)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl<'a> Add<&'a DualPoint> for &'a DualPoint {
    type Output = DualPoint;
    fn add(self, rhs: &DualPoint) -> DualPoint {
        DualPoint {
            y1: &self.y1 + &rhs.y1,
            y2: &self.y2 + &rhs.y2,
        }
    }
}

impl<'a> Sub<&'a DualPoint> for &'a DualPoint {
    type Output = DualPoint;
    fn sub(self, rhs: &DualPoint) -> DualPoint {
        DualPoint {
            y1: &self.y1 - &rhs.y1,
            y2: &self.y2 - &rhs.y2,
        }
    }
}

impl Mul<f64> for &DualPoint {
    type Output = DualPoint;
    fn mul(self, s: f64) -> DualPoint {
        DualPoint {
            y1: &self.y1 * s,
            y2: &self.y2 * s,
        }
    }
}

/// Operator norms computed once per bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorms {
    /// σ_max of the stacked operator `X ↦ (A1 X, A2 X)`; equals σ_max of its adjoint.
    pub sigma_a: f64,
    pub sigma_a_adj: f64,
    /// σ_max(A1†) = σ_max(A1).
    pub sigma_a1_adj: f64,
    /// λ_max(A1†A1 + A2†A2) = σ_a².
    pub lambda_max_ata: f64,
    /// λ_max(A2†A2).
    pub lambda_max_a2: f64,
}

/// Model, mask and cached operator norms.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    model: LtiModel,
    e: Mat,
    norms: SpectralNorms,
}

impl OperatorBundle {
    pub fn new(model: LtiModel, e: Mat) -> Result<Self> {
        let p = model.p();
        require_shape(&e, p, p, "OperatorBundle: E")?;
        let mut bundle = Self {
            model,
            e,
            norms: SpectralNorms {
                sigma_a: 0.0,
                sigma_a_adj: 0.0,
                sigma_a1_adj: 0.0,
                lambda_max_ata: 0.0,
                lambda_max_a2: 0.0,
            },
        };
        bundle.norms = spectral_norms(&bundle)?;
        Ok(bundle)
    }

    pub fn from_instance(instance: &crate::problem::ProblemInstance) -> Result<Self> {
        Self::new(instance.model.clone(), instance.data.e().clone())
    }

    pub fn model(&self) -> &LtiModel {
        &self.model
    }

    pub fn mask(&self) -> &Mat {
        &self.e
    }

    pub fn norms(&self) -> &SpectralNorms {
        &self.norms
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn apply_a1(&self, x: &Mat) -> Mat {
        let a = self.model.a();
        let ax = a * x;
        let t = ax.transpose();
        ax + t
    }

    pub fn apply_a2(&self, x: &Mat) -> Mat {
        let c = self.model.c();
        symmetrize(&(c * x * c.transpose())).component_mul(&self.e)
    }

    pub fn apply_a1_adj(&self, y: &Mat) -> Mat {
        let a = self.model.a();
        let ya = y * a;
        let t = ya.transpose();
        ya + t
    }

    pub fn apply_a2_adj(&self, y: &Mat) -> Mat {
        let c = self.model.c();
        symmetrize(&(c.transpose() * self.e.component_mul(y) * c))
    }

    /// `A†(Y) = A1†(Y1) + A2†(Y2)`.
    pub fn apply_adj(&self, y: &DualPoint) -> Mat {
        symmetrize(&(self.apply_a1_adj(&y.y1) + self.apply_a2_adj(&y.y2)))
    }

    /// `A†A(X)`.
    pub fn apply_normal(&self, x: &Mat) -> Mat {
        self.apply_a1_adj(&self.apply_a1(x)) + self.apply_a2_adj(&self.apply_a2(x))
    }
}

/// Dense-free evaluation of the dual function at a feasible point.
#[derive(Debug, Clone)]
pub struct DualEval {
    /// `A†(Y)`.
    pub adjoint: Mat,
    pub chol: Cholesky<f64, Dyn>,
    pub logdet: f64,
    pub value: f64,
}

impl DualEval {
    /// `X = A†(Y)⁻¹`.
    pub fn primal(&self) -> Mat {
        spd_inverse(&self.chol)
    }
}

/// Evaluates `J_d` at `y`, failing when `A†(Y)` is not positive definite.
pub fn evaluate_dual(bundle: &OperatorBundle, y: &DualPoint, g: &Mat) -> Result<DualEval> {
    let adjoint = bundle.apply_adj(y);
    let (chol, logdet) = cholesky_logdet(&adjoint).ok_or(CcError::DualInfeasible)?;
    let value = logdet - inner(g, &y.y2) + bundle.n() as f64;
    Ok(DualEval {
        adjoint,
        chol,
        logdet,
        value,
    })
}

pub fn dual_objective(bundle: &OperatorBundle, y: &DualPoint, g: &Mat) -> Result<f64> {
    evaluate_dual(bundle, y, g).map(|e| e.value)
}

/// Ascent direction of `J_d` given `X = A†(Y)⁻¹`: `(A1(X), A2(X) − G)`.
pub fn gradient_at(bundle: &OperatorBundle, x: &Mat, g: &Mat) -> DualPoint {
    DualPoint::new(bundle.apply_a1(x), bundle.apply_a2(x) - g)
}

pub fn dual_gradient(bundle: &OperatorBundle, y: &DualPoint, g: &Mat) -> Result<DualPoint> {
    let eval = evaluate_dual(bundle, y, g)?;
    Ok(gradient_at(bundle, &eval.primal(), g))
}

fn start_vector(n: usize) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let m = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = symmetrize(&m);
    let nrm = s.norm();
    s / nrm
}

/// Largest eigenvalue of a positive semidefinite self-adjoint map on
/// symmetric `n x n` matrices.
pub fn power_iteration(n: usize, op: impl Fn(&Mat) -> Mat) -> Result<f64> {
    let mut v = start_vector(n);
    let mut prev = f64::NAN;
    let mut last = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = symmetrize(&op(&v));
        let q = inner(&v, &w);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(0.0);
        }
        prev = last;
        last = q;
        if prev.is_finite() && (last - prev).abs() <= POWER_TOL * last.abs() {
            return Ok(last);
        }
        v = w / wn;
    }
    Err(CcError::PowerIteration {
        last,
        previous: prev,
    })
}

/// Computes the cached norms of a bundle.
pub fn spectral_norms(bundle: &OperatorBundle) -> Result<SpectralNorms> {
    let n = bundle.n();
    let lambda_max_ata = power_iteration(n, |x| bundle.apply_normal(x))?;
    let lambda_a1 = power_iteration(n, |x| bundle.apply_a1_adj(&bundle.apply_a1(x)))?;
    let lambda_max_a2 = power_iteration(n, |x| bundle.apply_a2_adj(&bundle.apply_a2(x)))?;
    let sigma_a = lambda_max_ata.max(0.0).sqrt();
    Ok(SpectralNorms {
        sigma_a,
        sigma_a_adj: sigma_a,
        sigma_a1_adj: lambda_a1.max(0.0).sqrt(),
        lambda_max_ata,
        lambda_max_a2,
    })
}
