//! ADMM baseline: augmented-Lagrangian minimization in both `X` and `Z`.
//!
//! The `X` step has no closed form, so it runs an inner proximal-gradient
//! loop whose proximal map is the log-det resolvent.

use crate::ama::z_update;
use crate::error::{CcError, Result};
use crate::linalg::{sym_spectral_norm, Mat};
use crate::linops::{evaluate_dual, DualPoint, OperatorBundle};
use crate::problem::ProblemInstance;
use crate::proxops::{logdet_resolvent, nuclear_norm_sym};
use crate::solver::{initial_dual, IterationRecord, SolveResult, SolverKind, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    Constant,
    /// Double or halve `ρ` when one residual exceeds the other tenfold.
    ResidualBalancing,
}

#[derive(Debug, Clone)]
pub struct AdmmOptions {
    pub rho: f64,
    pub mu_safety: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub eps_gap: f64,
    pub eps_primal: f64,
    pub max_iter: usize,
    pub step_policy: StepPolicy,
    pub stop: StopRule,
    pub record_iterates: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            mu_safety: 1.0,
            inner_tol: 1e-6,
            inner_max: 100_000,
            eps_gap: 0.005,
            eps_primal: 0.05,
            max_iter: 50_000,
            step_policy: StepPolicy::ResidualBalancing,
            stop: StopRule::Both,
            record_iterates: false,
        }
    }
}

impl AdmmOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.rho, self.inner_tol, self.eps_gap, self.eps_primal];
        if positive.iter().any(|v| !(*v > 0.0)) || self.inner_max == 0 || self.max_iter == 0 {
            return Err(CcError::InvalidInput("ADMM options must be positive".into()));
        }
        if !(self.mu_safety >= 1.0) {
            return Err(CcError::InvalidInput("mu safety factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Targets of the quadratic penalty in the `X` step: `(U1, U2)`.
fn penalty_targets(z: &Mat, y: &DualPoint, rho: f64, g: &Mat) -> (Mat, Mat) {
    (-(z + &y.y1 / rho), g - &y.y2 / rho)
}

/// `ρ Σⱼ Aⱼ†(Aⱼ X − Uⱼ)`.
fn penalty_gradient(bundle: &OperatorBundle, x: &Mat, u1: &Mat, u2: &Mat, rho: f64) -> Mat {
    let r1 = bundle.apply_a1(x) - u1;
    let r2 = bundle.apply_a2(x) - u2;
    (bundle.apply_a1_adj(&r1) + bundle.apply_a2_adj(&r2)) * rho
}

/// `‖−X⁻¹ + ρΣⱼAⱼ†(AⱼX − Uⱼ)‖_F`, the first-order residual of the `X` step.
pub fn x_step_stationarity(bundle: &OperatorBundle, x: &Mat, z: &Mat, y: &DualPoint, rho: f64, g: &Mat) -> f64 {
    let (u1, u2) = penalty_targets(z, y, rho, g);
    let xinv = x.clone().try_inverse().unwrap_or_else(|| Mat::from_element(x.nrows(), x.ncols(), f64::NAN));
    (penalty_gradient(bundle, x, &u1, &u2, rho) - xinv).norm()
}

/// Minimizes `−logdet X + (ρ/2)Σⱼ‖AⱼX − Uⱼ‖²_F` by proximal gradient,
/// warm-started at `x0`. Returns the minimizer and the inner iteration count.
pub fn x_update_admm(
    bundle: &OperatorBundle,
    z: &Mat,
    y: &DualPoint,
    rho: f64,
    g: &Mat,
    x0: &Mat,
    opts: &AdmmOptions,
) -> Result<(Mat, usize)> {
    let mu = opts.mu_safety * rho * bundle.norms().lambda_max_ata;
    debug_assert!(mu >= rho * bundle.norms().lambda_max_ata);
    let mu = if mu > 0.0 { mu } else { rho };
    let (u1, u2) = penalty_targets(z, y, rho, g);
    let mut x = x0.clone();
    let mut change = f64::INFINITY;
    for i in 0..opts.inner_max {
        let r = &x * mu - penalty_gradient(bundle, &x, &u1, &u2, rho);
        let next = logdet_resolvent(&r, mu);
        change = (&next - &x).norm();
        let scale = x.norm();
        x = next;
        if change <= opts.inner_tol * scale {
            return Ok((x, i + 1));
        }
    }
    Err(CcError::InnerLoop {
        iterations: opts.inner_max,
        last_change: change / x.norm(),
    })
}

pub fn solve_admm(instance: &ProblemInstance, opts: &AdmmOptions) -> Result<SolveResult> {
    let bundle = OperatorBundle::from_instance(instance)?;
    solve_admm_with(&bundle, instance, opts)
}

pub fn solve_admm_with(bundle: &OperatorBundle, instance: &ProblemInstance, opts: &AdmmOptions) -> Result<SolveResult> {
    opts.validate()?;
    let gamma = instance.gamma;
    let g = instance.data.g();
    let n = bundle.n();
    let mut y = initial_dual(bundle, gamma)?;
    let mut x = evaluate_dual(bundle, &y, g)?.primal();
    let mut z = Mat::zeros(n, n);
    let mut rho = opts.rho;
    let mut history = Vec::new();
    let mut iterates = opts.record_iterates.then(|| vec![y.clone()]);
    let mut converged = false;
    let mut gap = None;
    let mut primal_res = f64::INFINITY;

    for k in 0..opts.max_iter {
        let (x_new, inner) = x_update_admm(bundle, &z, &y, rho, g, &x, opts)?;
        x = x_new;
        let z_new = z_update(bundle, &x, &y.y1, rho, gamma);
        let r1 = bundle.apply_a1(&x) + &z_new;
        let r2 = bundle.apply_a2(&x) - g;
        primal_res = (r1.norm_squared() + r2.norm_squared()).sqrt();
        let dual_res = rho * bundle.apply_a1_adj(&(&z_new - &z)).norm();
        z = z_new;
        y = DualPoint::new(&y.y1 + &r1 * rho, &y.y2 + &r2 * rho);

        let logdet_x = crate::linalg::cholesky_logdet(&x)
            .map(|(_, l)| l)
            .ok_or(CcError::NotPositiveDefinite("ADMM iterate X"))?;
        let jp = -logdet_x + gamma * nuclear_norm_sym(&z);
        let jd = evaluate_dual(bundle, &y, g).ok().map(|e| e.value);
        gap = jd.map(|d| jp - d);
        history.push(IterationRecord {
            k,
            primal_objective: jp,
            dual_objective: jd,
            gap,
            primal_residual: primal_res,
            rho,
            backtracks: inner,
            y1_norm: sym_spectral_norm(&y.y1),
            dual_residual: Some(dual_res),
        });
        if let Some(it) = iterates.as_mut() {
            it.push(y.clone());
        }
        if opts.stop.should_stop(gap, primal_res, opts.eps_gap, opts.eps_primal) {
            converged = true;
            break;
        }
        if opts.step_policy == StepPolicy::ResidualBalancing {
            if primal_res > 10.0 * dual_res {
                rho *= 2.0;
            } else if dual_res > 10.0 * primal_res {
                rho /= 2.0;
            }
        }
    }

    Ok(SolveResult {
        solver: SolverKind::Admm,
        x,
        z,
        y,
        converged,
        iterations: history.len(),
        gap,
        primal_residual: primal_res,
        history,
        iterates,
        gamma,
    })
}
