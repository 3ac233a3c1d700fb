//! End-to-end acceptance suite. Runs every criterion at its stated tolerance
//! and prints one PASS/FAIL line each; exits nonzero if any criterion fails.
//!
//! Built with `harness = false` so the report is always printed. Passing a
//! name filter that does not match "acceptance" skips the suite.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ccama::admm::{solve_admm_with, AdmmOptions};
use ccama::ama::{solve_ama_with, AmaOptions, StepMode};
use ccama::cli::{build_realization, FilterMode, SolutionFile};
use ccama::decomposition::{check_signature_bounds, factor_channels, signature, BOUNDS_RESIDUAL_TOL, DEFAULT_ZERO_TOL};
use ccama::linalg::{numerical_rank, sym_eig_range, symmetrize};
use ccama::linops::{dual_gradient, dual_objective, DualPoint, OperatorBundle};
use ccama::problem::{gen_msd, CovarianceData, LtiModel, MsdGroundTruth, ProblemInstance};
use ccama::proxops::{saturate, soft_threshold, split};
use ccama::realization::RealizationFile;
use ccama::simulation::{block_relative_error, compare_covariance, simulate_ensemble, SimConfig};
use ccama::solver::{initial_dual, IterationRecord, SolveResult, SolverKind};
use ccama::Mat;
use common::*;
use rand::Rng;

const SWEEP_MASSES: usize = 50;
const SWEEP_GAMMAS: [f64; 13] = [0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// A finished run kept for the ascent/feasibility audit and the realization check.
struct Run {
    label: String,
    solver: SolverKind,
    gamma: f64,
    history: Vec<IterationRecord>,
}

#[derive(Default)]
struct Context {
    runs: Vec<Run>,
    /// Solved MSD instances: (label, instance, result).
    msd: Vec<(String, ProblemInstance, SolveResult)>,
    sweep: Vec<(f64, SolveResult)>,
    truth50: Option<MsdGroundTruth>,
}

impl Context {
    fn record(&mut self, label: impl Into<String>, r: &SolveResult) {
        self.runs.push(Run {
            label: label.into(),
            solver: r.solver,
            gamma: r.gamma,
            history: r.history.clone(),
        });
    }
}

fn first_within(h: &[IterationRecord], jstar: f64, tol: f64) -> Option<usize> {
    h.iter()
        .find(|r| r.dual_objective.is_some_and(|d| ((d - jstar) / jstar).abs() <= tol))
        .map(|r| r.k + 1)
}

fn tight(eps: f64, max_iter: usize) -> AmaOptions {
    AmaOptions {
        eps_gap: eps,
        eps_primal: eps,
        max_iter,
        ..Default::default()
    }
}

fn fmt_count(c: Option<usize>, cap: usize) -> String {
    c.map_or_else(|| format!(">{cap}"), |k| k.to_string())
}

// ---------------------------------------------------------------- shared sweep

fn run_sweep(ctx: &mut Context) {
    let gt = gen_msd(SWEEP_MASSES, 2.2, None).unwrap();
    let bundle = OperatorBundle::from_instance(&gt.instance).unwrap();
    for &gamma in &SWEEP_GAMMAS {
        let inst = gt.instance.with_gamma(gamma).unwrap();
        let t = Instant::now();
        let r = solve_ama_with(&bundle, &inst, &AmaOptions::default(), None).unwrap();
        let err = rel(&r.x, &gt.sigma_xx);
        eprintln!(
            "  sweep N={SWEEP_MASSES} gamma={gamma}: converged={} iterations={} rel_error={err:.4} ({:.1}s)",
            r.converged,
            r.iterations,
            t.elapsed().as_secs_f64()
        );
        ctx.record(format!("sweep N={SWEEP_MASSES} gamma={gamma}"), &r);
        ctx.msd.push((format!("N={SWEEP_MASSES} gamma={gamma}"), inst, r.clone()));
        ctx.sweep.push((gamma, r));
    }
    ctx.truth50 = Some(gt);
}

fn sweep_errors(ctx: &Context) -> Vec<(f64, f64)> {
    let truth = &ctx.truth50.as_ref().unwrap().sigma_xx;
    ctx.sweep.iter().map(|(g, r)| (*g, rel(&r.x, truth))).collect()
}

fn c01_sweep_shape(ctx: &mut Context) -> Verdict {
    let errs = sweep_errors(ctx);
    let all_conv = ctx.sweep.iter().all(|(_, r)| r.converged);
    let (g_min, e_min) = errs.iter().copied().fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let tail: Vec<f64> = errs.iter().filter(|(g, _)| *g > 1.4 + 1e-9).map(|(_, e)| *e).collect();
    let drops = tail.windows(2).filter(|w| w[1] < w[0]).count();
    let curve: Vec<String> = errs.iter().map(|(g, e)| format!("{g}:{e:.3}")).collect();
    verdict(
        all_conv && (1.0 - 1e-9..=1.4 + 1e-9).contains(&g_min) && drops <= 1,
        format!(
            "N={SWEEP_MASSES}, argmin gamma={g_min} (error {e_min:.4}), non-monotone steps above 1.4: {drops}, all converged: {all_conv}; curve [{}]",
            curve.join(" ")
        ),
    )
}

fn c02_matching_error(ctx: &mut Context) -> Verdict {
    let e = sweep_errors(ctx).into_iter().find(|(g, _)| (*g - 2.2).abs() < 1e-12).unwrap().1;
    verdict((e - 0.173).abs() <= 0.03, format!("N={SWEEP_MASSES}, gamma=2.2 relative error {e:.4} (target 0.173 +/- 0.03)"))
}

fn c03_signature(ctx: &mut Context) -> Verdict {
    let r = &ctx.sweep.iter().find(|(g, _)| (*g - 2.2).abs() < 1e-12).unwrap().1;
    let sig = signature(&r.z, DEFAULT_ZERO_TOL);
    let nonzero = sig.pi + sig.nu;
    let gap = sig.gap_ratio().unwrap_or(f64::INFINITY);
    let pass = r.converged
        && sig.pi.abs_diff(50) <= 2
        && sig.nu.abs_diff(12) <= 2
        && nonzero.abs_diff(62) <= 3
        && gap >= 100.0;
    verdict(
        pass,
        format!(
            "pi={} nu={} nonzero={} singular-value drop at cut {gap:.3e} (need >= 1e2), near-cut eigenvalues {}",
            sig.pi,
            sig.nu,
            nonzero,
            sig.near_cut.len()
        ),
    )
}

// ---------------------------------------------------------------- ordering

fn c04_solver_ordering(ctx: &mut Context) -> Verdict {
    let gt = gen_msd(25, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let reference = solve_ama_with(&bundle, inst, &tight(1e-8, 200_000), None).unwrap();
    let jstar = reference.dual_objective().unwrap();
    ctx.record("N=25 reference", &reference);

    let t = Instant::now();
    let bb = solve_ama_with(&bundle, inst, &AmaOptions::default(), None).unwrap();
    let bb_time = t.elapsed().as_secs_f64();
    // The tight reference run follows the same BB trajectory, only stopping later.
    let bb_reach = first_within(&reference.history, jstar, 1e-3);
    ctx.record("N=25 ama-bb", &bb);
    ctx.msd.push(("N=25 gamma=2.2".into(), inst.clone(), bb.clone()));

    let (alpha, _) = sym_eig_range(&bundle.apply_adj(&reference.y));
    let sigma = bundle.norms().sigma_a_adj;
    let rho = alpha * alpha / (sigma * sigma);
    let cap = 20_000;
    let fixed = solve_ama_with(
        &bundle,
        inst,
        &AmaOptions {
            step: StepMode::Fixed(rho),
            rho0: rho,
            ..tight(1e-12, cap)
        },
        None,
    )
    .unwrap();
    let fixed_reach = first_within(&fixed.history, jstar, 1e-3);
    ctx.record("N=25 ama-fixed", &fixed);

    let plain_cap = 5_000;
    let plain = solve_ama_with(
        &bundle,
        inst,
        &AmaOptions {
            step: StepMode::Backtracking,
            ..tight(1e-12, plain_cap)
        },
        None,
    )
    .unwrap();
    let plain_reach = first_within(&plain.history, jstar, 1e-3);
    ctx.record("N=25 ama", &plain);

    let admm_cap = 2_000;
    let t = Instant::now();
    let admm = solve_admm_with(
        &bundle,
        inst,
        &AdmmOptions {
            eps_gap: 1e-12,
            eps_primal: 1e-12,
            max_iter: admm_cap,
            ..Default::default()
        },
    )
    .unwrap();
    let admm_time = t.elapsed().as_secs_f64();
    let admm_reach = first_within(&admm.history, jstar, 1e-3);
    let admm_inner: usize = admm.history.iter().take(admm_reach.unwrap_or(admm_cap)).map(|h| h.backtracks).sum();
    ctx.record("N=25 admm", &admm);

    let bb_n = bb_reach.unwrap_or(usize::MAX);
    let beats = |other: Option<usize>| other.is_none_or(|k| bb_n < k);
    verdict(
        bb_reach.is_some() && beats(fixed_reach) && beats(admm_reach),
        format!(
            "iterations to 1e-3 of J_d*: ama-bb {} | ama-fixed (rho={rho:.3e}) {} | admm {} (inner prox-gradient steps {admm_inner}, {admm_time:.1}s for {} outer) | ama without BB {} | ama-bb default run {:.1}s",
            fmt_count(bb_reach, reference.iterations),
            fmt_count(fixed_reach, cap),
            fmt_count(admm_reach, admm_cap),
            admm.iterations,
            fmt_count(plain_reach, plain_cap),
            bb_time
        ),
    )
}

// ---------------------------------------------------------------- ascent audit

fn c05_ascent_and_feasibility(ctx: &mut Context) -> Verdict {
    let mut bad = Vec::new();
    let mut ama_runs = 0;
    let mut steps = 0;
    for run in &ctx.runs {
        let is_ama = run.solver != SolverKind::Admm;
        if is_ama {
            ama_runs += 1;
            let jd: Vec<Option<f64>> = run.history.iter().map(|h| h.dual_objective).collect();
            if jd.iter().any(Option::is_none) {
                bad.push(format!("{}: infeasible accepted iterate", run.label));
            }
            let jd: Vec<f64> = jd.into_iter().flatten().collect();
            steps += jd.len();
            if let Some(k) = jd.windows(2).position(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
                bad.push(format!("{}: J_d decreased at k={k}", run.label));
            }
        }
        if let Some(h) = run.history.iter().find(|h| h.y1_norm > run.gamma + 1e-10) {
            bad.push(format!("{}: ||Y1||={} > gamma at k={}", run.label, h.y1_norm, h.k));
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{ama_runs} AMA runs ({steps} accepted iterates) monotone, {} runs checked for ||Y1|| <= gamma + 1e-10{}",
            ctx.runs.len(),
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- fixed-step rate

fn c06_fixed_step_rate(ctx: &mut Context) -> Verdict {
    let gt = gen_msd(10, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let reference = solve_ama_with(&bundle, inst, &tight(1e-10, 200_000), None).unwrap();
    let jstar = reference.dual_objective().unwrap();
    ctx.record("N=10 reference", &reference);
    ctx.msd.push(("N=10 gamma=2.2".into(), inst.clone(), reference.clone()));

    let (alpha, _) = sym_eig_range(&bundle.apply_adj(&reference.y));
    let sigma = bundle.norms().sigma_a_adj;
    let rho = alpha * alpha / (sigma * sigma);
    let run = solve_ama_with(
        &bundle,
        inst,
        &AmaOptions {
            step: StepMode::Fixed(rho),
            rho0: rho,
            ..tight(1e-14, 1000)
        },
        None,
    )
    .unwrap();
    ctx.record("N=10 ama-fixed", &run);
    // history[k - 1] holds J_d(Yᵏ).
    let sub = |k: usize| jstar - run.history[k - 1].dual_objective.unwrap();
    let ks: Vec<usize> = (0..=40)
        .map(|i| (10f64 * 100f64.powf(i as f64 / 40.0)).round() as usize)
        .collect();
    // Upper envelope: largest suboptimality at or after each sample point.
    let env: Vec<f64> = ks.iter().map(|&k| (k..=1000).map(sub).fold(f64::MIN, f64::max)).collect();
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = env.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    let y0 = initial_dual(&bundle, inst.gamma).unwrap();
    let c = (&y0 - &reference.y).norm_sq() / (2.0 * rho);
    let bound_ok = (1..=1000).all(|k| sub(k) <= c / k as f64);
    verdict(
        slope <= -0.9,
        format!(
            "rho={rho:.3e}, log-log envelope slope over k in [10, 1000] = {slope:.3} (need <= -0.9); J*-J_d at k=10,100,1000: {:.3e}, {:.3e}, {:.3e}; worst-case bound ||Y0-Ybar||^2/(2 rho k) holds for all k: {bound_ok}",
            sub(10),
            sub(100),
            sub(1000)
        ),
    )
}

// ---------------------------------------------------------------- cross-solver

fn c07_cross_solver(ctx: &mut Context) -> Verdict {
    let mut r = rng(0xC0FFEE);
    let mut worst_x: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut all_conv = true;
    for i in 0..20 {
        let inst = random_full_instance(&mut r, 4, 1.0);
        let bundle = OperatorBundle::from_instance(&inst).unwrap();
        let a = solve_ama_with(&bundle, &inst, &tight(1e-10, 100_000), None).unwrap();
        let b = solve_admm_with(
            &bundle,
            &inst,
            &AdmmOptions {
                eps_gap: 1e-10,
                eps_primal: 1e-10,
                inner_tol: 1e-12,
                max_iter: 100_000,
                ..Default::default()
            },
        )
        .unwrap();
        all_conv &= a.converged && b.converged;
        worst_x = worst_x.max(rel(&a.x, &b.x));
        worst_z = worst_z.max(rel(&a.z, &b.z));
        worst_kkt = worst_kkt
            .max(kkt_residual(&bundle, &inst, &a.x, &a.z, &a.y))
            .max(kkt_residual(&bundle, &inst, &b.x, &b.z, &b.y));
        ctx.record(format!("random #{i} ama-bb"), &a);
        ctx.record(format!("random #{i} admm"), &b);
    }
    verdict(
        all_conv && worst_x <= 1e-4 && worst_z <= 1e-4 && worst_kkt <= 1e-6,
        format!("20 instances, worst relative gap X {worst_x:.2e}, Z {worst_z:.2e}, worst KKT residual {worst_kkt:.2e}, all converged: {all_conv}"),
    )
}

// ---------------------------------------------------------------- prox

fn c08_prox_identities(_: &mut Context) -> Verdict {
    let mut r = rng(0x9A0);
    let mut worst_split: f64 = 0.0;
    let mut worst_shrink: f64 = 0.0;
    let mut worst_sat: f64 = 0.0;
    for k in 0..100 {
        let n = 1 + k % 10;
        let m = random_sym(&mut r, n) * 2.0;
        let tau = r.random_range(0.0..2.0);
        let (sat, shr) = split(&m, tau);
        worst_split = worst_split.max((&sat + &shr - &m).norm());
        worst_shrink = worst_shrink.max((soft_threshold(&m, tau) - nuclear_prox_oracle(&m, tau, 200_000)).norm());
        worst_sat = worst_sat.max((saturate(&m, tau) - spectral_ball_oracle(&m, tau, 200_000)).norm());
    }
    verdict(
        worst_split <= 1e-12 && worst_shrink <= 1e-6 && worst_sat <= 1e-6,
        format!("100 matrices: ||T+S-M|| max {worst_split:.2e}; soft-threshold vs oracle {worst_shrink:.2e}; saturation vs oracle {worst_sat:.2e}"),
    )
}

// ---------------------------------------------------------------- decomposition

fn c09_decomposition(_: &mut Context) -> Verdict {
    let mut r = rng(0xDEC);
    let mut worst_rec: f64 = 0.0;
    let mut bad = 0;
    for k in 0..100 {
        let n = 1 + k % 12;
        let z = if k % 2 == 0 {
            random_sym(&mut r, n)
        } else {
            let rank = r.random_range(1..=n);
            random_inertia_matrix(&mut r, n, rank)
        };
        let sig = signature(&z, DEFAULT_ZERO_TOL);
        let dec = factor_channels(&z, DEFAULT_ZERO_TOL).unwrap();
        worst_rec = worst_rec.max(dec.reconstruction_error);
        if dec.m() != sig.pi.max(sig.nu) || numerical_rank(&dec.b, None) != dec.m() {
            bad += 1;
        }
    }
    let mut prop_fail = 0;
    let mut max_mu = 0;
    for case in 0..100 {
        let n = 2 + case % 9;
        let reps = 1 + case % 4;
        let a = if case % 5 == 4 {
            random_hurwitz(&mut r, n, 0.3)
        } else {
            let d = Mat::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| -1.0 - (i / reps) as f64));
            let s = Mat::identity(n, n) + random_mat(&mut r, n, n) * 0.3;
            &s * d * s.clone().try_inverse().unwrap()
        };
        let x = random_pd(&mut r, n);
        let z = symmetrize(&-(&a * &x + &x * a.transpose()));
        let b = check_signature_bounds(&a, &x, &z, n, DEFAULT_ZERO_TOL, BOUNDS_RESIDUAL_TOL).unwrap();
        max_mu = max_mu.max(b.mu_a);
        if !(b.mu_a <= b.pi) {
            prop_fail += 1;
        }
    }
    verdict(
        worst_rec <= 1e-8 && bad == 0 && prop_fail == 0,
        format!(
            "100 factorizations: worst reconstruction {worst_rec:.2e}, m/rank mismatches {bad}; 100 Lyapunov triples: pi(Z) >= mu(A) violations {prop_fail} (largest mu {max_mu})"
        ),
    )
}

// ---------------------------------------------------------------- gradient

fn fd_gradient_error(bundle: &OperatorBundle, g: &Mat, y: &DualPoint) -> f64 {
    let grad = dual_gradient(bundle, y, g).unwrap();
    // Truncation error of central differences grows like (h / λ_min)², so the
    // step follows the conditioning of A†(Y) rather than a fixed size.
    let ev = bundle.apply_adj(y).symmetric_eigenvalues();
    let h = 1e-5 * (ev.min() / ev.max()) * y.norm().max(1.0);
    let mut an = Vec::new();
    let mut fd = Vec::new();
    let mut probe = |d: DualPoint| {
        let plus = DualPoint::new(&y.y1 + &d.y1 * h, &y.y2 + &d.y2 * h);
        let minus = DualPoint::new(&y.y1 - &d.y1 * h, &y.y2 - &d.y2 * h);
        fd.push((dual_objective(bundle, &plus, g).unwrap() - dual_objective(bundle, &minus, g).unwrap()) / (2.0 * h));
        an.push(grad.dot(&d));
    };
    let basis = |m: usize, i: usize, j: usize| {
        let mut e = Mat::zeros(m, m);
        let v = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        e[(i, j)] = v;
        e[(j, i)] = v;
        e
    };
    let (n, p) = (bundle.n(), bundle.p());
    for i in 0..n {
        for j in i..n {
            probe(DualPoint::new(basis(n, i, j), Mat::zeros(p, p)));
        }
    }
    for i in 0..p {
        for j in i..p {
            probe(DualPoint::new(Mat::zeros(n, n), basis(p, i, j)));
        }
    }
    let num: f64 = an.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
    let den: f64 = an.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den
}

fn c10_gradient(_: &mut Context) -> Verdict {
    let mut r = rng(0x6AD);
    let n = 5;
    let p = 3;
    let a = random_hurwitz(&mut r, n, 0.3);
    let c = random_mat(&mut r, p, n);
    let e = Mat::from_fn(p, p, |i, j| if i == j || i + j == 2 { 1.0 } else { 0.0 });
    let sigma = random_pd(&mut r, n);
    let g = symmetrize(&(&c * sigma * c.transpose())).component_mul(&e);
    let inst = ProblemInstance::new(LtiModel::new(a, c).unwrap(), CovarianceData::new(g, e).unwrap(), 1.0).unwrap();
    let bundle = OperatorBundle::from_instance(&inst).unwrap();
    let worst = (0..20)
        .map(|_| {
            let y = random_feasible_dual(&mut r, &bundle, inst.gamma);
            fd_gradient_error(&bundle, inst.data.g(), &y)
        })
        .fold(0.0f64, f64::max);
    verdict(worst <= 1e-5, format!("5-state instance, 20 feasible points, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- realization

fn c11_realization(ctx: &mut Context) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    let mut failures = Vec::new();
    let mut count = 0;
    for (label, inst, r) in &ctx.msd {
        let sol = SolutionFile::new(r);
        for mode in [FilterMode::Eq5c, FilterMode::Optimal] {
            match build_realization(inst, &sol, mode, DEFAULT_ZERO_TOL) {
                Ok(f) => {
                    count += 1;
                    let hurwitz = f.spectrum.iter().all(|l| l[0] < 0.0);
                    if !hurwitz {
                        failures.push(format!("{label} {mode:?}: not Hurwitz"));
                    }
                    worst = worst.max(f.closed_loop_residual);
                    worst_dev = worst_dev.max(f.solver_x_deviation.unwrap_or(0.0));
                }
                Err(e) => failures.push(format!("{label} {mode:?}: {e}")),
            }
        }
    }
    verdict(
        failures.is_empty() && worst <= 1e-8,
        format!(
            "{count} realizations over {} solved instances, worst closed-loop residual / ||X|| {worst:.2e}, largest deviation of realized X from solver X {worst_dev:.3}{}",
            ctx.msd.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- simulation

fn c12_simulation(ctx: &mut Context) -> Verdict {
    let (_, inst, r) = ctx.msd.iter().find(|(l, _, _)| l == "N=25 gamma=2.2").unwrap();
    let file: RealizationFile = build_realization(inst, &SolutionFile::new(r), FilterMode::Eq5c, DEFAULT_ZERO_TOL).unwrap();
    let real = file.into_realization().unwrap();
    let cfg = SimConfig::for_realization(&real, 100, 2024);
    let t = Instant::now();
    let stats = simulate_ensemble(&real, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let cmp = compare_covariance(&stats.sample_cov, &r.x, Some(inst.data.e())).unwrap();
    let masked = cmp.masked_relative.unwrap_or(f64::INFINITY);
    let positions = block_relative_error(&stats.sample_cov, &r.x, 0, 25);
    verdict(
        masked <= 0.15 && positions <= 0.25 && secs < 60.0,
        format!(
            "100 trajectories, t_final={:.1}, dt={:.2e}: observed entries relative error {:.3} (<= 0.15), position block {positions:.3} (<= 0.25), full {:.3}, {secs:.1}s",
            cfg.t_final, cfg.dt, masked, cmp.full_relative
        ),
    )
}

// ---------------------------------------------------------------- driver

type Criterion = (usize, &'static str, fn(&mut Context) -> Verdict);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let started = Instant::now();
    let mut ctx = Context::default();
    eprintln!("acceptance: solving the N={SWEEP_MASSES} weight sweep");
    run_sweep(&mut ctx);

    // The audit of recorded runs goes last so it sees every run.
    let order: [Criterion; 12] = [
        (1, "gamma sweep error curve", c01_sweep_shape),
        (2, "matching error at gamma=2.2", c02_matching_error),
        (3, "signature at gamma=2.2", c03_signature),
        (4, "solver ordering", c04_solver_ordering),
        (6, "fixed-step sub-linear rate", c06_fixed_step_rate),
        (7, "cross-solver equivalence", c07_cross_solver),
        (8, "prox identities", c08_prox_identities),
        (9, "decomposition exactness", c09_decomposition),
        (10, "dual gradient check", c10_gradient),
        (11, "realization closed loop", c11_realization),
        (12, "simulation validation", c12_simulation),
        (5, "dual ascent and feasibility", c05_ascent_and_feasibility),
    ];
    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    for (id, name, f) in order {
        eprintln!("acceptance: criterion {id} ({name})");
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(|| f(&mut ctx))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        results.push((id, name, v, t.elapsed().as_secs_f64()));
    }
    results.sort_by_key(|r| r.0);

    println!();
    println!("acceptance results");
    for (id, name, v, secs) in &results {
        println!(
            "[{:>2}] {} {name}: {} ({secs:.1}s)",
            id,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "{} of {} criteria passed in {:.0}s{}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
