mod common;

use ccama::admm::{solve_admm_with, AdmmOptions};
use ccama::ama::{solve_ama_with, AmaOptions, StepMode};
use ccama::linalg::sym_eig_range;
use ccama::linops::OperatorBundle;
use ccama::problem::gen_msd;
use ccama::solver::{initial_dual, StopRule};
use common::*;

fn tight_ama() -> AmaOptions {
    AmaOptions {
        eps_gap: 1e-10,
        eps_primal: 1e-10,
        max_iter: 100_000,
        ..Default::default()
    }
}

fn tight_admm() -> AdmmOptions {
    AdmmOptions {
        eps_gap: 1e-10,
        eps_primal: 1e-10,
        inner_tol: 1e-12,
        max_iter: 100_000,
        ..Default::default()
    }
}

#[test]
fn ama_and_admm_agree_on_random_full_instances() {
    let mut r = rng(11);
    for _ in 0..5 {
        let inst = random_full_instance(&mut r, 4, 0.5);
        let bundle = OperatorBundle::from_instance(&inst).unwrap();
        let a = solve_ama_with(&bundle, &inst, &tight_ama(), None).unwrap();
        let b = solve_admm_with(&bundle, &inst, &tight_admm()).unwrap();
        assert!(a.converged && b.converged);
        assert!(rel(&a.x, &b.x) < 1e-6, "X differs: {}", rel(&a.x, &b.x));
        assert!(rel(&a.z, &b.z) < 1e-6, "Z differs: {}", rel(&a.z, &b.z));
        assert!(kkt_residual(&bundle, &inst, &a.x, &a.z, &a.y) < 1e-7);
        assert!(kkt_residual(&bundle, &inst, &b.x, &b.z, &b.y) < 1e-7);
    }
}

#[test]
fn backtracking_with_constant_step_matches_fixed_step() {
    // Once the initial step already gives sufficient ascent, plain
    // backtracking never shrinks it and reduces to the fixed-step method.
    let gt = gen_msd(3, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let y0 = initial_dual(&bundle, inst.gamma).unwrap();
    let (alpha, _) = sym_eig_range(&bundle.apply_adj(&y0));
    let sigma = bundle.norms().sigma_a_adj;
    let rho = 0.5 * alpha * alpha / (sigma * sigma);
    let base = AmaOptions {
        max_iter: 300,
        rho0: rho,
        ..Default::default()
    };
    let fixed = solve_ama_with(&bundle, inst, &AmaOptions { step: StepMode::Fixed(rho), ..base.clone() }, None).unwrap();
    let bt = solve_ama_with(&bundle, inst, &AmaOptions { step: StepMode::Backtracking, ..base }, None).unwrap();
    assert!(bt.history.iter().all(|h| h.backtracks == 0 && h.rho == rho));
    assert_eq!(fixed.iterations, bt.iterations);
    assert_eq!(fixed.x, bt.x);
    assert_eq!(fixed.y, bt.y);
}

#[test]
fn dual_ascent_and_feasibility_on_msd() {
    let gt = gen_msd(5, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    for step in [StepMode::BbBacktracking, StepMode::Backtracking] {
        let r = solve_ama_with(&bundle, inst, &AmaOptions { step, max_iter: 2000, ..Default::default() }, None).unwrap();
        let jd: Vec<f64> = r.history.iter().map(|h| h.dual_objective.unwrap()).collect();
        for w in jd.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
        assert!(r.history.iter().all(|h| h.y1_norm <= inst.gamma + 1e-10));
    }
}

#[test]
fn either_stop_rule_halts_no_later_than_both() {
    let gt = gen_msd(4, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let both = solve_ama_with(&bundle, inst, &AmaOptions::default(), None).unwrap();
    let either = solve_ama_with(&bundle, inst, &AmaOptions { stop: StopRule::Either, ..Default::default() }, None).unwrap();
    assert!(either.iterations <= both.iterations);
    let loose = solve_ama_with(
        &bundle,
        inst,
        &AmaOptions {
            stop: StopRule::Either,
            eps_gap: 1e9,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(loose.iterations, 1);
}

#[test]
fn warm_start_from_solution_stops_immediately() {
    let gt = gen_msd(3, 1.5, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let first = solve_ama_with(&bundle, inst, &tight_ama(), None).unwrap();
    let again = solve_ama_with(&bundle, inst, &tight_ama(), Some(first.y.clone())).unwrap();
    assert!(
        again.iterations * 20 <= first.iterations,
        "warm {} vs cold {}",
        again.iterations,
        first.iterations
    );
    assert!(rel(&again.x, &first.x) < 1e-8);
}

#[test]
fn non_convergence_returns_last_iterate() {
    let gt = gen_msd(4, 2.2, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let r = solve_ama_with(&bundle, inst, &AmaOptions { max_iter: 3, ..Default::default() }, None).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 3);
    assert_eq!(r.history.len(), 3);
    let a = solve_admm_with(&bundle, inst, &AdmmOptions { max_iter: 3, ..Default::default() }).unwrap();
    assert!(!a.converged);
    assert_eq!(a.iterations, 3);
}

#[test]
fn steps_below_contraction_bound_contract_toward_optimum() {
    use ccama::diagnostics::{check_contraction, diagnose};
    let gt = gen_msd(2, 1.0, None).unwrap();
    let inst = &gt.instance;
    let bundle = OperatorBundle::from_instance(inst).unwrap();
    let opt = solve_ama_with(&bundle, inst, &tight_ama(), None).unwrap();
    let y0 = initial_dual(&bundle, inst.gamma).unwrap();
    let d = diagnose(&bundle, inst.data.g(), inst.gamma, &y0, &opt.y).unwrap();
    let rho = d.contraction_bound;
    // The bound is local to the optimum, so start from a loose solve.
    let loose = solve_ama_with(&bundle, inst, &AmaOptions::default(), None).unwrap();
    let run = solve_ama_with(
        &bundle,
        inst,
        &AmaOptions {
            step: StepMode::Fixed(rho),
            rho0: rho,
            max_iter: 300,
            record_iterates: true,
            ..Default::default()
        },
        Some(loose.y.clone()),
    )
    .unwrap();
    let its = run.iterates.as_ref().unwrap();
    let rhos: Vec<f64> = run.history.iter().map(|h| h.rho).collect();
    let c = check_contraction(its, &rhos, &opt.y, d.contraction_bound).unwrap();
    assert_eq!(c.steps_checked, run.iterations);
    assert!(c.verdict, "violations at {:?}", c.violations);
}
