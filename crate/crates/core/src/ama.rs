//! Customized alternating minimization for the completion problem.
//!
//! Each iteration takes the closed-form `X = A†(Y)⁻¹`, a singular value
//! thresholding step for `Z`, and saturated dual updates. The step size is
//! chosen by Barzilai-Borwein initialization plus backtracking, by
//! backtracking alone, or held fixed (proximal gradient on the dual).

use crate::error::{CcError, Result};
use crate::linalg::{sym_spectral_norm, Mat};
use crate::linops::{evaluate_dual, gradient_at, DualEval, DualPoint, OperatorBundle};
use crate::problem::ProblemInstance;
use crate::proxops::{saturate, soft_threshold, split};
use crate::solver::{
    initial_dual, primal_objective, IterationRecord, SolveResult, SolverKind, StopRule,
};

/// How the dual step size is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// Barzilai-Borwein initial trial, then backtracking.
    BbBacktracking,
    /// Backtracking from `rho0` at every iteration.
    Backtracking,
    /// Constant step, no backtracking.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct AmaOptions {
    pub eps_gap: f64,
    pub eps_primal: f64,
    pub beta: f64,
    pub rho0: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub step: StepMode,
    pub stop: StopRule,
    pub record_iterates: bool,
}

impl Default for AmaOptions {
    fn default() -> Self {
        Self {
            eps_gap: 0.005,
            eps_primal: 0.05,
            beta: 0.5,
            rho0: 1.0,
            max_iter: 50_000,
            max_backtracks: 60,
            step: StepMode::BbBacktracking,
            stop: StopRule::Both,
            record_iterates: false,
        }
    }
}

impl AmaOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_gap, self.eps_primal, self.rho0];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iter == 0 || self.max_backtracks == 0 {
            return Err(CcError::InvalidInput("AMA options must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(CcError::InvalidInput("backtracking constant must lie in (0, 1)".into()));
        }
        if let StepMode::Fixed(r) = self.step {
            if !(r > 0.0) {
                return Err(CcError::InvalidInput("fixed step must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> SolverKind {
        match self.step {
            StepMode::BbBacktracking => SolverKind::AmaBb,
            StepMode::Backtracking => SolverKind::Ama,
            StepMode::Fixed(_) => SolverKind::AmaFixed,
        }
    }
}

/// `X = A†(Y)⁻¹`.
pub fn x_update(bundle: &OperatorBundle, y: &DualPoint) -> Result<Mat> {
    let adj = bundle.apply_adj(y);
    let chol = nalgebra::Cholesky::new(adj).ok_or(CcError::DualInfeasible)?;
    Ok(crate::linalg::spd_inverse(&chol))
}

/// `Z = S_{γ/ρ}(V)` with `V = −(A1(X) + Y1/ρ)`.
pub fn z_update(bundle: &OperatorBundle, x: &Mat, y1: &Mat, rho: f64, gamma: f64) -> Mat {
    let v = -(bundle.apply_a1(x) + y1 / rho);
    soft_threshold(&v, gamma / rho)
}

/// `Y1⁺ = T_γ(Y1 + ρA1(X))`, `Y2⁺ = Y2 + ρ(A2(X) − G)`.
pub fn dual_update(
    bundle: &OperatorBundle,
    x: &Mat,
    y: &DualPoint,
    rho: f64,
    gamma: f64,
    g: &Mat,
) -> DualPoint {
    let y1 = saturate(&(&y.y1 + bundle.apply_a1(x) * rho), gamma);
    let y2 = &y.y2 + (bundle.apply_a2(x) - g) * rho;
    DualPoint::new(y1, y2)
}

/// Barzilai-Borwein quotient `‖ΔY‖² / ⟨ΔY, ∇J_d(Y_prev) − ∇J_d(Y_cur)⟩`,
/// falling back to `fallback` when the denominator is degenerate.
pub fn bb_step(
    y_prev: &DualPoint,
    y_cur: &DualPoint,
    grad_prev: &DualPoint,
    grad_cur: &DualPoint,
    fallback: f64,
) -> f64 {
    let dy = y_cur - y_prev;
    let num = dy.norm_sq();
    let den = dy.dot(&(grad_prev - grad_cur));
    let rho = num / den;
    if num == 0.0 || !(den > 1e-14 * num) || !rho.is_finite() {
        fallback
    } else {
        rho
    }
}

/// A candidate dual step together with the quantities backtracking checks.
#[derive(Debug, Clone)]
pub struct Step {
    pub y: DualPoint,
    pub z: Mat,
    pub rho: f64,
    pub eval: DualEval,
    /// Rejected trials before acceptance.
    pub backtracks: usize,
}

/// Relative slack accepted on the sufficient-ascent test, for rounding in `J_d`.
const ASCENT_SLACK: f64 = 1e-12;

fn trial(
    y: &DualPoint,
    a1x: &Mat,
    grad_y2: &Mat,
    rho: f64,
    gamma: f64,
) -> (DualPoint, Mat) {
    let m = &y.y1 + a1x * rho;
    let (sat, shrink) = split(&m, gamma);
    let z = shrink / (-rho);
    let y2 = &y.y2 + grad_y2 * rho;
    (DualPoint::new(sat, y2), z)
}

/// `J_d(Y⁺) − [J_d(Y) + ⟨∇J_d(Y), ΔY⟩ − ‖ΔY‖²/(2ρ)]`.
pub fn ascent_slack(jd: f64, grad: &DualPoint, y: &DualPoint, cand: &DualPoint, cand_jd: f64, rho: f64) -> f64 {
    let dy = cand - y;
    cand_jd - (jd + grad.dot(&dy) - dy.norm_sq() / (2.0 * rho))
}

/// Finds the first `ρ ∈ {βʲρ₀}` whose dual update keeps `A†(Y⁺) ≻ 0` and
/// achieves sufficient ascent of `J_d`.
#[allow(clippy::too_many_arguments)]
pub fn backtrack(
    bundle: &OperatorBundle,
    y: &DualPoint,
    current: &DualEval,
    x: &Mat,
    rho0: f64,
    beta: f64,
    gamma: f64,
    g: &Mat,
    max_backtracks: usize,
) -> Result<Step> {
    let grad = gradient_at(bundle, x, g);
    let a1x = &grad.y1;
    let mut rho = rho0;
    let mut trace = Vec::with_capacity(max_backtracks);
    let mut min_eig = f64::NAN;
    let mut slack = f64::NAN;
    for j in 0..max_backtracks {
        trace.push(rho);
        let (cand, z) = trial(y, a1x, &grad.y2, rho, gamma);
        match evaluate_dual(bundle, &cand, g) {
            Ok(eval) => {
                slack = ascent_slack(current.value, &grad, y, &cand, eval.value, rho);
                if slack >= -ASCENT_SLACK * (1.0 + current.value.abs()) {
                    return Ok(Step {
                        y: cand,
                        z,
                        rho,
                        eval,
                        backtracks: j,
                    });
                }
                min_eig = f64::NAN;
            }
            Err(_) => {
                min_eig = crate::linalg::sym_eig_range(&bundle.apply_adj(&cand)).0;
                slack = f64::NAN;
            }
        }
        rho *= beta;
    }
    Err(CcError::Backtracking {
        rho_trace: trace,
        min_eig,
        ascent_slack: slack,
    })
}

/// Constant step `α₀²/σ²_max(A†)` with `α₀ = λ_min(A†(Y⁰))`.
pub fn default_fixed_step(bundle: &OperatorBundle, y0: &DualPoint) -> f64 {
    let alpha = crate::linalg::sym_eig_range(&bundle.apply_adj(y0)).0;
    let sigma = bundle.norms().sigma_a_adj;
    alpha * alpha / (sigma * sigma)
}

/// Runs the customized AMA on `instance`.
pub fn solve_ama(instance: &ProblemInstance, opts: &AmaOptions) -> Result<SolveResult> {
    let bundle = OperatorBundle::from_instance(instance)?;
    solve_ama_with(&bundle, instance, opts, None)
}

/// As [`solve_ama`] with a prepared bundle and optional dual starting point.
pub fn solve_ama_with(
    bundle: &OperatorBundle,
    instance: &ProblemInstance,
    opts: &AmaOptions,
    start: Option<DualPoint>,
) -> Result<SolveResult> {
    opts.validate()?;
    let gamma = instance.gamma;
    let g = instance.data.g();
    let mut y = match start {
        Some(y) => y,
        None => initial_dual(bundle, gamma)?,
    };
    let mut eval = evaluate_dual(bundle, &y, g)?;
    let mut x = eval.primal();
    let mut grad = gradient_at(bundle, &x, g);
    let mut history = Vec::new();
    let mut iterates = opts.record_iterates.then(|| vec![y.clone()]);
    let mut rho_next = opts.rho0;

    let mut z = Mat::zeros(bundle.n(), bundle.n());
    let mut x_out = x.clone();
    let mut converged = false;
    let mut gap = None;
    let mut primal_res = f64::INFINITY;

    for k in 0..opts.max_iter {
        let step = match opts.step {
            StepMode::Fixed(rho) => {
                let (cand, zc) = trial(&y, &grad.y1, &grad.y2, rho, gamma);
                let cand_eval = evaluate_dual(bundle, &cand, g)
                    .map_err(|_| CcError::FixedStepInfeasible { rho, iteration: k })?;
                Step {
                    y: cand,
                    z: zc,
                    rho,
                    eval: cand_eval,
                    backtracks: 0,
                }
            }
            _ => backtrack(
                bundle,
                &y,
                &eval,
                &x,
                rho_next,
                opts.beta,
                gamma,
                g,
                opts.max_backtracks,
            )?,
        };

        let rho = step.rho;
        let dy = &step.y - &y;
        primal_res = dy.norm() / rho;
        let jp = primal_objective(-eval.logdet, &step.z, gamma);
        let jd = step.eval.value;
        let current_gap = jp - jd;
        gap = Some(current_gap);
        history.push(IterationRecord {
            k,
            primal_objective: jp,
            dual_objective: Some(jd),
            gap: Some(current_gap),
            primal_residual: primal_res,
            rho,
            backtracks: step.backtracks,
            y1_norm: sym_spectral_norm(&step.y.y1),
            dual_residual: None,
        });

        x_out = x;
        z = step.z;
        let y_prev = std::mem::replace(&mut y, step.y);
        eval = step.eval;
        x = eval.primal();
        let grad_prev = std::mem::replace(&mut grad, gradient_at(bundle, &x, g));
        if let Some(it) = iterates.as_mut() {
            it.push(y.clone());
        }

        if opts.stop.should_stop(gap, primal_res, opts.eps_gap, opts.eps_primal) {
            converged = true;
            break;
        }

        rho_next = match opts.step {
            StepMode::BbBacktracking => bb_step(&y_prev, &y, &grad_prev, &grad, rho),
            StepMode::Backtracking => opts.rho0,
            StepMode::Fixed(r) => r,
        };
    }

    Ok(SolveResult {
        solver: opts.kind(),
        x: x_out,
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
