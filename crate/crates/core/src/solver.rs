//! Types shared by the AMA and ADMM solvers: initialization, stopping rule,
//! per-iteration history and the solve result.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::linalg::{sym_spectral_norm, Mat};
use crate::linops::{DualPoint, OperatorBundle};
use crate::lyapunov::lyapunov_solve;
use crate::proxops::nuclear_norm_sym;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// AMA with Barzilai-Borwein initial step and backtracking.
    AmaBb,
    /// AMA with backtracking from a constant initial step.
    Ama,
    /// AMA with a constant step and no backtracking.
    AmaFixed,
    Admm,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::AmaBb => "ama-bb",
            SolverKind::Ama => "ama",
            SolverKind::AmaFixed => "ama-fixed",
            SolverKind::Admm => "admm",
        }
    }
}

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StopRule {
    /// Stop once `|Δ_gap| ≤ ε₁` and `Δ_p ≤ ε₂`.
    #[default]
    Both,
    /// Loop only while `|Δ_gap| > ε₁` and `Δ_p > ε₂`: either test stops.
    Either,
}

impl StopRule {
    pub fn should_stop(&self, gap: Option<f64>, primal: f64, eps_gap: f64, eps_primal: f64) -> bool {
        let gap_ok = gap.is_some_and(|g| g.abs() <= eps_gap);
        let primal_ok = primal <= eps_primal;
        match self {
            StopRule::Both => gap_ok && primal_ok,
            StopRule::Either => gap_ok || primal_ok,
        }
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub primal_objective: f64,
    /// `None` when `A†(Y)` is not positive definite at this iterate.
    pub dual_objective: Option<f64>,
    pub gap: Option<f64>,
    pub primal_residual: f64,
    pub rho: f64,
    pub backtracks: usize,
    /// `‖Y1‖₂` after the update.
    pub y1_norm: f64,
    /// ADMM only: `ρ‖A1†(Z⁺ − Z)‖_F`.
    pub dual_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub x: Mat,
    pub z: Mat,
    pub y: DualPoint,
    pub converged: bool,
    pub iterations: usize,
    pub gap: Option<f64>,
    pub primal_residual: f64,
    pub history: Vec<IterationRecord>,
    /// Dual iterates `Y⁰, Y¹, …` when recording was requested.
    pub iterates: Option<Vec<DualPoint>>,
    pub gamma: f64,
}

impl SolveResult {
    pub fn primal_objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.primal_objective)
    }

    pub fn dual_objective(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.dual_objective)
    }

    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        write_history_csv(self.solver, &self.history, out)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:e}"))
}

/// Columns: `solver,k,J_p,J_d,gap,primal_residual,rho,backtracks`.
pub fn write_history_csv<W: Write>(solver: SolverKind, history: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "k", "J_p", "J_d", "gap", "primal_residual", "rho", "backtracks"])?;
    for r in history {
        w.write_record([
            solver.as_str().to_string(),
            r.k.to_string(),
            format!("{:e}", r.primal_objective),
            opt(r.dual_objective),
            opt(r.gap),
            format!("{:e}", r.primal_residual),
            format!("{:e}", r.rho),
            r.backtracks.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CcError::Io {
        path: "<history>".into(),
        source,
    })?;
    Ok(())
}

/// Parses a history CSV written by [`write_history_csv`].
pub fn read_history_csv<R: std::io::Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| CcError::InvalidInput(format!("bad number '{s}' in history")))
    };
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s == "NA" {
            Ok(None)
        } else {
            parse(s).map(Some)
        }
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 8 {
            return Err(CcError::InvalidInput("short history row".into()));
        }
        out.push(IterationRecord {
            k: row[1]
                .parse()
                .map_err(|_| CcError::InvalidInput("bad iteration index".into()))?,
            primal_objective: parse(&row[2])?,
            dual_objective: parse_opt(&row[3])?,
            gap: parse_opt(&row[4])?,
            primal_residual: parse(&row[5])?,
            rho: parse(&row[6])?,
            backtracks: row[7]
                .parse()
                .map_err(|_| CcError::InvalidInput("bad backtrack count".into()))?,
            y1_norm: f64::NAN,
            dual_residual: None,
        });
    }
    Ok(out)
}

/// Dual starting point: `Y2 = 0` and `Y1 = c·Y_L` with `AᵀY_L + Y_L A = I`,
/// scaled so that `A1†(Y1) = (γ/‖Y1‖₂)·I`, then shrunk into `‖Y1‖₂ ≤ γ` if needed.
pub fn initial_dual(bundle: &OperatorBundle, gamma: f64) -> Result<DualPoint> {
    let n = bundle.n();
    let a = bundle.model().a();
    let yl = lyapunov_solve(&a.transpose(), &(-Mat::identity(n, n)))?;
    let yl_norm = sym_spectral_norm(&yl);
    let c = (gamma / yl_norm).sqrt();
    let mut y1 = yl * c;
    let y1_norm = sym_spectral_norm(&y1);
    if y1_norm > gamma {
        y1 *= gamma / y1_norm;
    }
    Ok(DualPoint::new(y1, Mat::zeros(bundle.p(), bundle.p())))
}

/// `J_p(X, Z) = −logdet X + γ‖Z‖_*` given `logdet X`.
pub fn primal_objective(logdet_x: f64, z: &Mat, gamma: f64) -> f64 {
    -logdet_x + gamma * nuclear_norm_sym(z)
}

/// `‖(A1 X + Z, A2 X − G)‖_F`.
pub fn primal_residual(bundle: &OperatorBundle, x: &Mat, z: &Mat, g: &Mat) -> f64 {
    let r1 = bundle.apply_a1(x) + z;
    let r2 = bundle.apply_a2(x) - g;
    (r1.norm_squared() + r2.norm_squared()).sqrt()
}
