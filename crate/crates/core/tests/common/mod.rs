//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ccama::linalg::{max_real_eigenvalue, symmetrize};
use ccama::linops::{DualPoint, OperatorBundle};
use ccama::lyapunov::lyapunov_solve;
use ccama::problem::{CovarianceData, LtiModel, ProblemInstance};
use ccama::proxops::soft_threshold;
use ccama::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    symmetrize(&random_mat(rng, n, n))
}

/// Random matrix shifted so its rightmost eigenvalue sits at `-margin`.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let r = random_mat(rng, n, n);
    let shift = max_real_eigenvalue(&r) + margin;
    r - Mat::identity(n, n) * shift
}

pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = random_mat(rng, n, n);
    symmetrize(&(&m * m.transpose() + Mat::identity(n, n) * 0.5))
}

/// Fully observed instance with `C = I` whose `G` is the steady-state
/// covariance of `A` driven by random inputs, so the data are consistent.
pub fn random_full_instance(rng: &mut ChaCha8Rng, n: usize, gamma: f64) -> ProblemInstance {
    let a = random_hurwitz(rng, n, 0.5);
    let b = random_mat(rng, n, 2);
    let sigma = symmetrize(&lyapunov_solve(&a, &(&b * b.transpose() + Mat::identity(n, n) * 0.1)).unwrap());
    let model = LtiModel::new(a, Mat::identity(n, n)).unwrap();
    let data = CovarianceData::new(sigma, Mat::from_element(n, n, 1.0)).unwrap();
    ProblemInstance::new(model, data, gamma).unwrap()
}

/// Largest relative violation among the optimality conditions:
/// `X·A†(Y) = I`, `−Y1 ∈ γ∂‖Z‖_*`, and both equality constraints.
pub fn kkt_residual(bundle: &OperatorBundle, inst: &ProblemInstance, x: &Mat, z: &Mat, y: &DualPoint) -> f64 {
    let n = x.nrows();
    let g = inst.data.g();
    let stationarity = (x * bundle.apply_adj(y) - Mat::identity(n, n)).norm() / (n as f64).sqrt();
    let subgrad = (z - soft_threshold(&(z - &y.y1), inst.gamma)).norm() / z.norm().max(1.0);
    let lin = (bundle.apply_a1(x) + z).norm() / z.norm().max(1.0);
    let obs = (bundle.apply_a2(x) - g).norm() / g.norm().max(1.0);
    stationarity.max(subgrad).max(lin).max(obs)
}

pub fn rel(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Projection onto the positive semidefinite cone.
pub fn psd_part(m: &Mat) -> Mat {
    let e = symmetrize(m).symmetric_eigen();
    let d = e.eigenvalues.map(|l| l.max(0.0));
    &e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Minimizes `τ‖X‖_* + ½‖X − M‖²_F` by projected gradient over the
/// split `X = P − N` with `P, N ⪰ 0`, using only cone projections.
pub fn nuclear_prox_oracle(m: &Mat, tau: f64, iters: usize) -> Mat {
    let n = m.nrows();
    let id = Mat::identity(n, n);
    let mut p = psd_part(m);
    let mut q = psd_part(&-m);
    for _ in 0..iters {
        let r = &p - &q - m;
        let np = psd_part(&(&p - (&r + &id * tau) * 0.5));
        let nq = psd_part(&(&q - (-&r + &id * tau) * 0.5));
        let change = (&np - &p).norm() + (&nq - &q).norm();
        p = np;
        q = nq;
        if change < 1e-15 * (1.0 + m.norm()) {
            break;
        }
    }
    p - q
}

/// Projection onto `{‖Y‖₂ ≤ τ}` by Dykstra's method on the two cones
/// `Y ⪯ τI` and `Y ⪰ −τI`.
pub fn spectral_ball_oracle(m: &Mat, tau: f64, iters: usize) -> Mat {
    let n = m.nrows();
    let id = Mat::identity(n, n);
    let upper = |y: &Mat| &id * tau - psd_part(&(&id * tau - y));
    let lower = |y: &Mat| psd_part(&(y + &id * tau)) - &id * tau;
    let mut x = m.clone();
    let mut p = Mat::zeros(n, n);
    let mut q = Mat::zeros(n, n);
    for _ in 0..iters {
        let y = upper(&(&x + &p));
        p = &x + &p - &y;
        let nx = lower(&(&y + &q));
        q = &y + &q - &nx;
        let change = (&nx - &x).norm();
        x = nx;
        if change < 1e-15 * (1.0 + m.norm()) {
            break;
        }
    }
    x
}

/// Largest singular value of `X ↦ (A1 X, A2 X)` on symmetric matrices,
/// from its explicit matrix in an orthonormal symmetric basis.
pub fn stacked_operator_norm(bundle: &OperatorBundle) -> f64 {
    let n = bundle.n();
    let p = bundle.p();
    let mut cols = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut e = Mat::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            let y1 = bundle.apply_a1(&e);
            let y2 = bundle.apply_a2(&e);
            cols.push(y1.iter().chain(y2.iter()).copied().collect::<Vec<f64>>());
        }
    }
    let rows = n * n + p * p;
    let m = Mat::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    m.singular_values().max()
}

/// Random dual point with `A†(Y) ≻ 0`, found by rejection around a scaled start.
pub fn random_feasible_dual(rng: &mut ChaCha8Rng, bundle: &OperatorBundle, gamma: f64) -> DualPoint {
    let y0 = ccama::solver::initial_dual(bundle, gamma).unwrap();
    loop {
        let scale: f64 = rng.random_range(0.01..0.3);
        let d = DualPoint::new(
            random_sym(rng, bundle.n()) * scale * y0.y1.norm(),
            random_sym(rng, bundle.p()) * scale,
        );
        let y = DualPoint::new(&y0.y1 + &d.y1, &y0.y2 + &d.y2);
        if nalgebra::Cholesky::new(bundle.apply_adj(&y)).is_some() {
            return y;
        }
    }
}

/// Worst relative mismatch between the analytic dual gradient and central
/// differences of `J_d` along random symmetric directions, measured on
/// directional derivatives.
pub fn gradient_check(rng: &mut ChaCha8Rng, bundle: &OperatorBundle, g: &Mat, y: &DualPoint, dirs: usize) -> f64 {
    use ccama::linops::{dual_gradient, dual_objective};
    let grad = dual_gradient(bundle, y, g).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..dirs {
        let d = DualPoint::new(random_sym(rng, bundle.n()), random_sym(rng, bundle.p()));
        let d = DualPoint::new(&d.y1 / d.norm(), &d.y2 / d.norm());
        let h = 1e-5 * y.norm().max(1.0);
        let plus = DualPoint::new(&y.y1 + &d.y1 * h, &y.y2 + &d.y2 * h);
        let minus = DualPoint::new(&y.y1 - &d.y1 * h, &y.y2 - &d.y2 * h);
        let fd = (dual_objective(bundle, &plus, g).unwrap() - dual_objective(bundle, &minus, g).unwrap()) / (2.0 * h);
        let an = grad.dot(&d);
        worst = worst.max((fd - an).abs() / an.abs().max(grad.norm() * 1e-3));
    }
    worst
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    random_mat(rng, n, n).qr().q()
}

/// Symmetric `Q diag(λ) Qᵀ` with `rank` nonzero eigenvalues of random sign
/// and magnitude in `[0.1, 10]`, the rest exactly zero.
pub fn random_inertia_matrix(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Mat {
    let q = random_orthogonal(rng, n);
    let d = nalgebra::DVector::from_fn(n, |i, _| {
        if i < rank {
            let mag = rng.random_range(0.1..10.0);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        } else {
            0.0
        }
    });
    symmetrize(&(&q * Mat::from_diagonal(&d) * q.transpose()))
}
