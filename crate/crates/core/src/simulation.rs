//! Ensemble simulation of the closed loop `ẋ = Acl x + Bw` driven by white
//! noise, and comparison of the sample covariance with a target.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::linalg::{expm, is_hurwitz, max_real_eigenvalue, spectral_norm, symmetrize, Mat};
use crate::realization::{FilterRealization, HURWITZ_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact transition matrix and noise covariance over each step.
    #[default]
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Upper bound on the number of recorded time points.
    pub max_records: usize,
}

/// Fraction of the horizon, at the end, used for the sample covariance.
pub const TAIL_FRACTION: f64 = 0.2;

/// Trajectories integrated together before their sums are folded in.
const CHUNK: usize = 16;

impl SimConfig {
    /// Horizon of 50 slowest time constants of `Acl`, 10⁴ steps.
    pub fn for_realization(r: &FilterRealization, n_traj: usize, seed: u64) -> Self {
        let t_final = 50.0 / max_real_eigenvalue(&r.acl).abs();
        Self {
            dt: t_final / 10_000.0,
            t_final,
            n_traj,
            seed,
            scheme: Scheme::Exact,
            max_records: 1000,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt <= self.t_final) {
            return Err(CcError::InvalidInput("need 0 < dt <= t_final".into()));
        }
        if self.n_traj == 0 || self.max_records == 0 {
            return Err(CcError::InvalidInput("need at least one trajectory and record".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Ensemble mean of `xᵢ²` at each recorded time.
    pub variances: Vec<Vec<f64>>,
    /// Ensemble mean of `xᵀx` at each recorded time.
    pub total_variance: Vec<f64>,
    /// Time and ensemble average of `x xᵀ` over the tail window.
    pub sample_cov: Mat,
    pub tail_start: f64,
    pub n_traj: usize,
}

/// One-step propagation `x ← Φx + Lξ`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub phi: Mat,
    /// Factor of the per-step noise covariance.
    pub noise: Mat,
    pub qd: Mat,
}

/// Transition matrix and discrete noise covariance via one block exponential.
pub fn exact_discretization(acl: &Mat, noise_intensity: &Mat, dt: f64) -> Result<Discretization> {
    let n = acl.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-acl * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(noise_intensity * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(acl.transpose() * dt));
    let f = expm(&m);
    let f12 = f.view((0, n), (n, n)).into_owned();
    let phi = f.view((n, n), (n, n)).transpose();
    let qd = symmetrize(&(&phi * f12));
    let noise = psd_factor(&qd)?;
    Ok(Discretization { phi, noise, qd })
}

/// `L` with `LLᵀ = Q`, clipping tiny negative eigenvalues.
pub fn psd_factor(q: &Mat) -> Result<Mat> {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(q));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut l = eig.eigenvectors.clone();
    for (k, mut col) in l.column_iter_mut().enumerate() {
        let lam = eig.eigenvalues[k];
        if lam < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(CcError::NoiseCovariance { eigenvalue: lam });
        }
        col *= lam.max(0.0).sqrt();
    }
    Ok(l)
}

fn euler_step(acl: &Mat, noise_factor: &Mat, dt: f64) -> Discretization {
    let n = acl.nrows();
    let phi = Mat::identity(n, n) + acl * dt;
    let noise = noise_factor * dt.sqrt();
    let qd = &noise * noise.transpose();
    Discretization { phi, noise, qd }
}

struct TrajectorySums {
    variances: Vec<Vec<f64>>,
    tail: Mat,
}

fn run_trajectory(
    disc: &Discretization,
    steps: usize,
    stride: usize,
    tail_from: usize,
    seed: u64,
    index: u64,
) -> TrajectorySums {
    let n = disc.phi.nrows();
    let k = disc.noise.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut x = nalgebra::DVector::<f64>::zeros(n);
    let mut xi = nalgebra::DVector::<f64>::zeros(k);
    let mut next = nalgebra::DVector::<f64>::zeros(n);
    let mut variances = vec![x.iter().map(|v| v * v).collect::<Vec<f64>>()];
    let mut tail = Mat::zeros(n, n);
    for step in 1..=steps {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        next.gemv(1.0, &disc.phi, &x, 0.0);
        next.gemv(1.0, &disc.noise, &xi, 1.0);
        std::mem::swap(&mut x, &mut next);
        if step % stride == 0 {
            variances.push(x.iter().map(|v| v * v).collect());
        }
        if step >= tail_from {
            tail.ger(1.0, &x, &x, 1.0);
        }
    }
    TrajectorySums { variances, tail }
}

/// Integrates `cfg.n_traj` trajectories from `x(0) = 0`.
///
/// Each trajectory owns a ChaCha stream selected by its index, and sums are
/// folded in index order, so the output is independent of thread scheduling.
pub fn simulate_ensemble(r: &FilterRealization, cfg: &SimConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let acl = &r.acl;
    if !is_hurwitz(acl, HURWITZ_MARGIN * spectral_norm(acl)) {
        return Err(CcError::NotHurwitz {
            max_real: max_real_eigenvalue(acl),
        });
    }
    let n = acl.nrows();
    let steps = cfg.steps().max(1);
    let dt = cfg.t_final / steps as f64;
    let disc = match cfg.scheme {
        Scheme::Exact => exact_discretization(acl, &r.noise_intensity(), dt)?,
        Scheme::EulerMaruyama => {
            let omega_factor = psd_factor(&r.omega)?;
            euler_step(acl, &(&r.b * omega_factor), dt)
        }
    };
    let stride = steps.div_ceil(cfg.max_records).max(1);
    let tail_from = ((1.0 - TAIL_FRACTION) * steps as f64).ceil() as usize;
    let tail_from = tail_from.clamp(1, steps);
    let tail_len = (steps - tail_from + 1) as f64;

    let n_rec = steps / stride + 1;
    let mut var_sum = vec![vec![0.0; n]; n_rec];
    let mut tail_sum = Mat::zeros(n, n);
    let indices: Vec<usize> = (0..cfg.n_traj).collect();
    for chunk in indices.chunks(CHUNK) {
        let results: Vec<TrajectorySums> = chunk
            .par_iter()
            .map(|&i| run_trajectory(&disc, steps, stride, tail_from, cfg.seed, i as u64))
            .collect();
        for res in results {
            for (acc, v) in var_sum.iter_mut().zip(res.variances) {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
            }
            tail_sum += res.tail;
        }
    }
    let m = cfg.n_traj as f64;
    let variances: Vec<Vec<f64>> = var_sum
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / m).collect())
        .collect();
    let total_variance = variances.iter().map(|row| row.iter().sum()).collect();
    let times = (0..n_rec).map(|j| (j * stride) as f64 * dt).collect();
    Ok(EnsembleStats {
        times,
        variances,
        total_variance,
        sample_cov: symmetrize(&(tail_sum / (m * tail_len))),
        tail_start: tail_from as f64 * dt,
        n_traj: cfg.n_traj,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceComparison {
    /// `‖(S − X)∘E‖_F / ‖X∘E‖_F`, when a mask is given.
    pub masked_relative: Option<f64>,
    /// Largest entrywise relative error over masked entries with `|Xᵢⱼ|`
    /// above `1e−8·max|X|`.
    pub masked_max_entry_relative: Option<f64>,
    pub full_relative: f64,
    pub diag_sample: Vec<f64>,
    pub diag_target: Vec<f64>,
}

pub fn compare_covariance(sample: &Mat, target: &Mat, mask: Option<&Mat>) -> Result<CovarianceComparison> {
    crate::linalg::require_shape(sample, target.nrows(), target.ncols(), "compare_covariance: sample")?;
    let full_relative = (sample - target).norm() / target.norm();
    let (masked_relative, masked_max_entry_relative) = match mask {
        Some(e) => {
            crate::linalg::require_shape(e, target.nrows(), target.ncols(), "compare_covariance: mask")?;
            let num = (sample - target).component_mul(e).norm();
            let den = target.component_mul(e).norm();
            let floor = 1e-8 * target.amax();
            let worst = target
                .iter()
                .zip(sample.iter())
                .zip(e.iter())
                .filter(|((t, _), m)| **m != 0.0 && t.abs() > floor)
                .map(|((t, s), _)| ((s - t) / t).abs())
                .fold(0.0f64, f64::max);
            (Some(num / den), Some(worst))
        }
        None => (None, None),
    };
    Ok(CovarianceComparison {
        masked_relative,
        masked_max_entry_relative,
        full_relative,
        diag_sample: sample.diagonal().iter().copied().collect(),
        diag_target: target.diagonal().iter().copied().collect(),
    })
}

/// Relative Frobenius error on the diagonal block `[start, start + len)`.
pub fn block_relative_error(sample: &Mat, target: &Mat, start: usize, len: usize) -> f64 {
    let s = sample.view((start, start), (len, len));
    let t = target.view((start, start), (len, len));
    (s - t).norm() / t.norm()
}

/// Columns: `time,total,var_0,…,var_{n−1}`.
pub fn write_stats_csv<W: Write>(stats: &EnsembleStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = stats.variances.first().map_or(0, Vec::len);
    let mut header = vec!["time".to_string(), "total".to_string()];
    header.extend((0..n).map(|i| format!("var_{i}")));
    w.write_record(&header)?;
    for ((t, tot), row) in stats.times.iter().zip(&stats.total_variance).zip(&stats.variances) {
        let mut rec = vec![format!("{t:e}"), format!("{tot:e}")];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| CcError::Io {
        path: "<stats>".into(),
        source,
    })?;
    Ok(())
}
