//! Post-hoc constants from the dual convergence analysis, evaluated at a
//! solved dual point, plus a retrospective check of monotone contraction
//! toward that point.

use serde::Serialize;

use crate::error::{CcError, Result};
use crate::linalg::{inner, sym_eig_range, Mat};
use crate::linops::{evaluate_dual, DualPoint, OperatorBundle};

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// `σ_max(A†)`.
    pub sigma_adj: f64,
    /// `σ_max(A1†)`.
    pub sigma_a1_adj: f64,
    /// `λ_min(A†(Ȳ))`.
    pub alpha: f64,
    /// `λ_max(A†(Ȳ))`.
    pub beta: f64,
    /// Lipschitz constant `σ²_max(A†)/α²` of the dual gradient.
    pub lipschitz: f64,
    /// `1/L`, the proximal-gradient step.
    pub lipschitz_step: f64,
    /// `2α⁴/(β²σ²_max(A))`.
    pub contraction_bound: f64,
    /// Uniform bounds on `A†(Yᵏ)` from the initial point, in log space
    /// because the lower one underflows for moderate `n`.
    pub uniform_beta: f64,
    pub uniform_log_alpha: f64,
    pub uniform_log_step_bound: f64,
    pub contraction: Option<ContractionCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionCheck {
    /// Steps whose `ρ` did not exceed the contraction bound.
    pub steps_checked: usize,
    /// Iterations `k` with `‖Yᵏ⁺¹ − Ȳ‖ > ‖Yᵏ − Ȳ‖` among checked steps.
    pub violations: Vec<usize>,
    pub verdict: bool,
}

/// Relative slack on distance comparisons, covering rounding in `Ȳ`.
const CONTRACTION_SLACK: f64 = 1e-9;

/// Evaluates the constants at `ȳ` with `x̄ = A†(Ȳ)⁻¹`, using `y0` for the
/// uniform bounds.
pub fn diagnose(bundle: &OperatorBundle, g: &Mat, gamma: f64, y0: &DualPoint, ybar: &DualPoint) -> Result<Diagnostics> {
    let n = bundle.n() as f64;
    let norms = bundle.norms();
    let sigma = norms.sigma_a_adj;
    let bar = evaluate_dual(bundle, ybar, g)?;
    let (alpha, beta) = sym_eig_range(&bar.adjoint);
    let xbar = bar.primal();
    let start = evaluate_dual(bundle, y0, g)?;

    let uniform_beta = sigma * (y0 - ybar).norm() + beta;
    let uniform_log_alpha = start.logdet + (1.0 - n) * uniform_beta.ln()
        - inner(g, &y0.y2)
        - gamma * n.sqrt() * norms.sigma_a1_adj * xbar.trace();
    let uniform_log_step_bound =
        2f64.ln() + 4.0 * uniform_log_alpha - 2.0 * uniform_beta.ln() - 2.0 * sigma.ln();

    let lipschitz = sigma * sigma / (alpha * alpha);
    Ok(Diagnostics {
        sigma_adj: sigma,
        sigma_a1_adj: norms.sigma_a1_adj,
        alpha,
        beta,
        lipschitz,
        lipschitz_step: 1.0 / lipschitz,
        contraction_bound: 2.0 * alpha.powi(4) / (beta * beta * norms.sigma_a * norms.sigma_a),
        uniform_beta,
        uniform_log_alpha,
        uniform_log_step_bound,
        contraction: None,
    })
}

/// Checks `‖Yᵏ⁺¹ − Ȳ‖_F ≤ ‖Yᵏ − Ȳ‖_F` for every step `k` with `ρₖ ≤ bound`.
///
/// `rhos[k]` is the step taken from `iterates[k]` to `iterates[k + 1]`.
pub fn check_contraction(iterates: &[DualPoint], rhos: &[f64], ybar: &DualPoint, bound: f64) -> Result<ContractionCheck> {
    if iterates.len() < 2 {
        return Err(CcError::InvalidInput("need at least two recorded iterates".into()));
    }
    if rhos.len() + 1 < iterates.len() {
        return Err(CcError::InvalidInput("step history shorter than iterate record".into()));
    }
    let slack = CONTRACTION_SLACK * ybar.norm().max(1.0);
    let dist: Vec<f64> = iterates.iter().map(|y| (y - ybar).norm()).collect();
    let mut checked = 0;
    let mut violations = Vec::new();
    for k in 0..iterates.len() - 1 {
        if rhos[k] <= bound {
            checked += 1;
            if dist[k + 1] > dist[k] + slack {
                violations.push(k);
            }
        }
    }
    Ok(ContractionCheck {
        steps_checked: checked,
        verdict: violations.is_empty(),
        violations,
    })
}
