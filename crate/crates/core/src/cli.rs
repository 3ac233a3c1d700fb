//! Command-line surface: argument definitions and one function per
//! subcommand. Every command writes its artifacts plus a `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::admm::{solve_admm_with, AdmmOptions, StepPolicy};
use crate::ama::{default_fixed_step, solve_ama_with, AmaOptions, StepMode};
use crate::decomposition::{factor_channels, DecompositionExport, DEFAULT_ZERO_TOL};
use crate::diagnostics::{check_contraction, diagnose, Diagnostics};
use crate::error::{CcError, Result};
use crate::linalg::{from_rows, symmetrize, to_rows, Mat};
use crate::linops::{DualPoint, OperatorBundle};
use crate::lyapunov::lyapunov_solve;
use crate::problem::{gen_msd, ProblemInstance};
use crate::realization::{filter_gain, optimal_gain, RealizationFile};
use crate::simulation::{
    block_relative_error, compare_covariance, simulate_ensemble, write_stats_csv, CovarianceComparison, Scheme,
    SimConfig,
};
use crate::solver::{initial_dual, read_history_csv, SolveResult, SolverKind, StopRule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "ccama", version, about = "Structured covariance completion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate the mass-spring-damper benchmark instance.
    GenMsd(GenMsdArgs),
    /// Solve one completion problem.
    Solve(SolveArgs),
    /// Solve over a list of regularization weights.
    Sweep(SweepArgs),
    /// Factor the solved Z into input channels.
    Decompose(DecomposeArgs),
    /// Build a feedback filter realizing the solved covariance.
    Filter(FilterArgs),
    /// Simulate a realization and compare sample statistics.
    Simulate(SimulateArgs),
    /// Evaluate convergence constants at a solved dual point.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct GenMsdArgs {
    #[arg(long, env = "CCAMA_MASSES")]
    pub masses: usize,
    #[arg(long, env = "CCAMA_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "CCAMA_GAMMA", default_value_t = 2.2)]
    pub gamma: f64,
    /// Optional JSON file holding a custom symmetric 0/1 mask.
    #[arg(long, env = "CCAMA_MASK")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum SolverArg {
    Ama,
    AmaBb,
    AmaFixed,
    Admm,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum StepPolicyArg {
    Constant,
    ResidualBalancing,
}

/// Solver settings shared by `solve` and `sweep`.
#[derive(Debug, Args, Serialize, Clone)]
pub struct SolverSettings {
    #[arg(long, env = "CCAMA_SOLVER", value_enum, default_value_t = SolverArg::AmaBb)]
    pub solver: SolverArg,
    #[arg(long, env = "CCAMA_EPS_GAP", default_value_t = 0.005)]
    pub eps_gap: f64,
    #[arg(long, env = "CCAMA_EPS_PRIMAL", default_value_t = 0.05)]
    pub eps_primal: f64,
    #[arg(long, env = "CCAMA_MAX_ITER", default_value_t = 50_000)]
    pub max_iter: usize,
    /// Stop when either tolerance is met instead of both.
    #[arg(long, env = "CCAMA_EITHER_STOP")]
    pub either_stop: bool,
    /// Step size: fixed step for ama-fixed, initial step for ama, penalty for admm.
    #[arg(long, env = "CCAMA_RHO")]
    pub rho: Option<f64>,
    #[arg(long, env = "CCAMA_BETA", default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, env = "CCAMA_MAX_BACKTRACKS", default_value_t = 60)]
    pub max_backtracks: usize,
    #[arg(long, env = "CCAMA_MU_SAFETY", default_value_t = 1.0)]
    pub mu_safety: f64,
    #[arg(long, env = "CCAMA_INNER_TOL", default_value_t = 1e-6)]
    pub inner_tol: f64,
    #[arg(long, env = "CCAMA_INNER_MAX", default_value_t = 100_000)]
    pub inner_max: usize,
    #[arg(long, env = "CCAMA_STEP_POLICY", value_enum, default_value_t = StepPolicyArg::ResidualBalancing)]
    pub step_policy: StepPolicyArg,
    /// Keep every dual iterate (written to iterates.json).
    #[arg(long, env = "CCAMA_RECORD_ITERATES")]
    pub record_iterates: bool,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SolveArgs {
    #[arg(long, env = "CCAMA_INSTANCE")]
    pub instance: PathBuf,
    #[arg(long, env = "CCAMA_OUT")]
    pub out: PathBuf,
    /// Override the instance's regularization weight.
    #[arg(long, env = "CCAMA_GAMMA")]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub settings: SolverSettings,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SweepArgs {
    #[arg(long, env = "CCAMA_INSTANCE")]
    pub instance: PathBuf,
    #[arg(long, env = "CCAMA_GAMMAS", value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    #[arg(long, env = "CCAMA_OUT")]
    pub out: PathBuf,
    /// Ground-truth sidecar; defaults to `<instance stem>.truth.json`.
    #[arg(long, env = "CCAMA_TRUTH")]
    pub truth: Option<PathBuf>,
    #[arg(long, env = "CCAMA_ZERO_TOL", default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    #[command(flatten)]
    pub settings: SolverSettings,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct DecomposeArgs {
    #[arg(long, env = "CCAMA_SOLUTION")]
    pub solution: PathBuf,
    #[arg(long, env = "CCAMA_ZERO_TOL", default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Defaults to `<solution>/decomposition.json`.
    #[arg(long, env = "CCAMA_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum FilterMode {
    /// Gain from the channel factors `B`, `H`.
    Eq5c,
    /// Least-energy gain for the same `B`.
    Optimal,
}

impl FilterMode {
    fn as_str(&self) -> &'static str {
        match self {
            FilterMode::Eq5c => "eq5c",
            FilterMode::Optimal => "optimal",
        }
    }
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct FilterArgs {
    #[arg(long, env = "CCAMA_SOLUTION")]
    pub solution: PathBuf,
    #[arg(long, env = "CCAMA_MODE", value_enum, default_value_t = FilterMode::Eq5c)]
    pub mode: FilterMode,
    #[arg(long, env = "CCAMA_ZERO_TOL", default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Defaults to `<solution>/realization.json`.
    #[arg(long, env = "CCAMA_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum SchemeArg {
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SimulateArgs {
    #[arg(long, env = "CCAMA_REALIZATION")]
    pub realization: PathBuf,
    #[arg(long, env = "CCAMA_TRAJ", default_value_t = 20)]
    pub traj: usize,
    #[arg(long, env = "CCAMA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Defaults to 50 slowest closed-loop time constants.
    #[arg(long, env = "CCAMA_TFINAL")]
    pub tfinal: Option<f64>,
    /// Defaults to `tfinal / 10000`.
    #[arg(long, env = "CCAMA_DT")]
    pub dt: Option<f64>,
    #[arg(long, env = "CCAMA_SCHEME", value_enum, default_value_t = SchemeArg::Exact)]
    pub scheme: SchemeArg,
    #[arg(long, env = "CCAMA_MAX_RECORDS", default_value_t = 1000)]
    pub max_records: usize,
    /// Defaults to the realization's directory.
    #[arg(long, env = "CCAMA_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct DiagnoseArgs {
    #[arg(long, env = "CCAMA_SOLUTION")]
    pub solution: PathBuf,
    /// Defaults to `<solution>/diagnostics.json`.
    #[arg(long, env = "CCAMA_OUT")]
    pub out: Option<PathBuf>,
}

/// Result of a command: whether the exit status should flag non-convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 2,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenMsd(a) => cmd_gen_msd(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}

// ---------------------------------------------------------------- file helpers

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CcError + '_ {
    move |source| CcError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CcError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CcError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text).map_err(io_err(path))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<stem>.truth.json` next to an instance file.
pub fn truth_path(instance: &Path) -> PathBuf {
    let stem = instance.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    instance.with_file_name(format!("{stem}.truth.json"))
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Serialize, Deserialize, Clone)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub instance_sha256: Option<String>,
    pub seeds: Vec<u64>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub version: String,
    /// Values chosen by the tool when a flag was left unset.
    pub resolved: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    fn new<T: Serialize>(command: &str, flags: &T) -> Self {
        Self {
            command: command.to_string(),
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            instance_sha256: None,
            seeds: Vec::new(),
            timings: BTreeMap::new(),
            iterations: None,
            converged: None,
            version: VERSION.to_string(),
            resolved: BTreeMap::new(),
        }
    }

    fn time<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.timings.insert(phase.to_string(), t.elapsed().as_secs_f64());
        r
    }

    fn resolve(&mut self, key: &str, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.resolved.insert(key.to_string(), v);
        }
    }
}

// ---------------------------------------------------------------- gen-msd

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthFile {
    pub masses: usize,
    #[serde(rename = "Sigma_xx")]
    pub sigma_xx: Vec<Vec<f64>>,
    #[serde(rename = "Sigma_full")]
    pub sigma_full: Vec<Vec<f64>>,
}

pub fn cmd_gen_msd(args: &GenMsdArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("gen-msd", args);
    let mask = match &args.mask {
        Some(p) => Some(from_rows(&read_json::<Vec<Vec<f64>>>(p)?)?),
        None => None,
    };
    let gt = manifest.time("generate", || gen_msd(args.masses, args.gamma, mask))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let json = gt.instance.to_json();
    fs::write(&args.out, &json).map_err(io_err(&args.out))?;
    manifest.instance_sha256 = Some(sha256_hex(json.as_bytes()));
    let truth = TruthFile {
        masses: gt.masses,
        sigma_xx: to_rows(&gt.sigma_xx),
        sigma_full: to_rows(&gt.sigma_full),
    };
    write_json(&truth_path(&args.out), &truth)?;
    let stem = args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    write_json(&args.out.with_file_name(format!("{stem}.manifest.json")), &manifest)?;
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Serialize, Deserialize, Clone)]
pub struct SolutionFile {
    pub solver: String,
    pub converged: bool,
    pub iterations: usize,
    pub gamma: f64,
    pub gap: Option<f64>,
    pub primal_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: Option<f64>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Z")]
    pub z: Vec<Vec<f64>>,
    #[serde(rename = "Y1")]
    pub y1: Vec<Vec<f64>>,
    #[serde(rename = "Y2")]
    pub y2: Vec<Vec<f64>>,
}

impl SolutionFile {
    pub fn new(r: &SolveResult) -> Self {
        Self {
            solver: r.solver.as_str().to_string(),
            converged: r.converged,
            iterations: r.iterations,
            gamma: r.gamma,
            gap: r.gap,
            primal_residual: r.primal_residual,
            primal_objective: r.primal_objective(),
            dual_objective: r.dual_objective(),
            x: to_rows(&r.x),
            z: to_rows(&r.z),
            y1: to_rows(&r.y.y1),
            y2: to_rows(&r.y.y2),
        }
    }

    pub fn x(&self) -> Result<Mat> {
        from_rows(&self.x)
    }

    pub fn z(&self) -> Result<Mat> {
        from_rows(&self.z)
    }

    pub fn dual(&self) -> Result<DualPoint> {
        Ok(DualPoint::new(from_rows(&self.y1)?, from_rows(&self.y2)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IterateFile {
    #[serde(rename = "Y1")]
    pub y1: Vec<Vec<f64>>,
    #[serde(rename = "Y2")]
    pub y2: Vec<Vec<f64>>,
}

/// Runs the configured solver; `manifest` receives resolved defaults.
pub fn run_solver(
    bundle: &OperatorBundle,
    instance: &ProblemInstance,
    s: &SolverSettings,
    manifest: &mut RunManifest,
) -> Result<SolveResult> {
    let stop = if s.either_stop { StopRule::Either } else { StopRule::Both };
    if s.solver == SolverArg::Admm {
        let opts = AdmmOptions {
            rho: s.rho.unwrap_or(1.0),
            mu_safety: s.mu_safety,
            inner_tol: s.inner_tol,
            inner_max: s.inner_max,
            eps_gap: s.eps_gap,
            eps_primal: s.eps_primal,
            max_iter: s.max_iter,
            step_policy: match s.step_policy {
                StepPolicyArg::Constant => StepPolicy::Constant,
                StepPolicyArg::ResidualBalancing => StepPolicy::ResidualBalancing,
            },
            stop,
            record_iterates: s.record_iterates,
        };
        manifest.resolve("rho", opts.rho);
        return solve_admm_with(bundle, instance, &opts);
    }
    let step = match s.solver {
        SolverArg::AmaBb => StepMode::BbBacktracking,
        SolverArg::Ama => StepMode::Backtracking,
        _ => {
            let rho = match s.rho {
                Some(r) => r,
                None => default_fixed_step(bundle, &initial_dual(bundle, instance.gamma)?),
            };
            StepMode::Fixed(rho)
        }
    };
    let opts = AmaOptions {
        eps_gap: s.eps_gap,
        eps_primal: s.eps_primal,
        beta: s.beta,
        rho0: match step {
            StepMode::Fixed(r) => r,
            _ => s.rho.unwrap_or(1.0),
        },
        max_iter: s.max_iter,
        max_backtracks: s.max_backtracks,
        step,
        stop,
        record_iterates: s.record_iterates,
    };
    manifest.resolve("rho", opts.rho0);
    solve_ama_with(bundle, instance, &opts, None)
}

/// Writes `instance.json`, `solution.json`, `history.csv`, `iterates.json`
/// (when recorded) and the manifest into `dir`.
fn write_solve_outputs(dir: &Path, instance: &ProblemInstance, result: &SolveResult, manifest: &RunManifest) -> Result<()> {
    ensure_dir(dir)?;
    fs::write(dir.join("instance.json"), instance.to_json()).map_err(io_err(dir))?;
    write_json(&dir.join("solution.json"), &SolutionFile::new(result))?;
    let hist_path = dir.join("history.csv");
    let file = fs::File::create(&hist_path).map_err(io_err(&hist_path))?;
    result.write_history_csv(std::io::BufWriter::new(file))?;
    if let Some(its) = &result.iterates {
        let rows: Vec<IterateFile> = its
            .iter()
            .map(|y| IterateFile {
                y1: to_rows(&y.y1),
                y2: to_rows(&y.y2),
            })
            .collect();
        write_json(&dir.join("iterates.json"), &rows)?;
    }
    write_json(&dir.join("manifest.json"), manifest)
}

fn solve_into(dir: &Path, instance: &ProblemInstance, settings: &SolverSettings, mut manifest: RunManifest) -> Result<SolveResult> {
    manifest.instance_sha256 = Some(sha256_hex(instance.to_json().as_bytes()));
    let bundle = manifest.time("operator_norms", || OperatorBundle::from_instance(instance))?;
    let result = {
        let t = Instant::now();
        let r = run_solver(&bundle, instance, settings, &mut manifest)?;
        manifest.timings.insert("solve".into(), t.elapsed().as_secs_f64());
        r
    };
    manifest.iterations = Some(result.iterations);
    manifest.converged = Some(result.converged);
    manifest.resolve("solver", result.solver.as_str());
    write_solve_outputs(dir, instance, &result, &manifest)?;
    Ok(result)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome> {
    let manifest = RunManifest::new("solve", args);
    let mut instance = ProblemInstance::load(&args.instance)?;
    if let Some(g) = args.gamma {
        instance = instance.with_gamma(g)?;
    }
    let result = solve_into(&args.out, &instance, &args.settings, manifest)?;
    Ok(if result.converged { Outcome::Done } else { Outcome::NotConverged })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `‖X − Σ_xx‖_F / ‖Σ_xx‖_F`, empty without ground truth.
    pub rel_error: Option<f64>,
    pub pi: usize,
    pub nu: usize,
    pub rank: usize,
}

/// Directory name used for one weight of a sweep.
pub fn gamma_dir(gamma: f64) -> String {
    format!("gamma_{gamma}")
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    if args.gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(CcError::InvalidInput("all gammas must be positive".into()));
    }
    let base = ProblemInstance::load(&args.instance)?;
    let truth_file = args.truth.clone().unwrap_or_else(|| truth_path(&args.instance));
    let truth = if truth_file.exists() {
        Some(from_rows(&read_json::<TruthFile>(&truth_file)?.sigma_xx)?)
    } else {
        None
    };
    ensure_dir(&args.out)?;
    let rows: Vec<Result<SweepRow>> = args
        .gammas
        .par_iter()
        .map(|&gamma| {
            let instance = base.with_gamma(gamma)?;
            let manifest = RunManifest::new("solve", &SolveArgs {
                instance: args.instance.clone(),
                out: args.out.join(gamma_dir(gamma)),
                gamma: Some(gamma),
                settings: args.settings.clone(),
            });
            let r = solve_into(&args.out.join(gamma_dir(gamma)), &instance, &args.settings, manifest)?;
            let sig = crate::decomposition::signature(&r.z, args.zero_tol);
            Ok(SweepRow {
                gamma,
                converged: r.converged,
                iterations: r.iterations,
                rel_error: truth.as_ref().map(|t| (&r.x - t).norm() / t.norm()),
                pi: sig.pi,
                nu: sig.nu,
                rank: sig.pi + sig.nu,
            })
        })
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;

    let path = args.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["gamma", "converged", "iterations", "rel_error", "pi", "nu", "rank"])?;
    for r in &rows {
        w.write_record([
            r.gamma.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.rel_error.map_or_else(|| "NA".into(), |e| format!("{e:e}")),
            r.pi.to_string(),
            r.nu.to_string(),
            r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    let mut manifest = RunManifest::new("sweep", args);
    manifest.instance_sha256 = Some(sha256_hex(base.to_json().as_bytes()));
    manifest.converged = Some(rows.iter().all(|r| r.converged));
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(if rows.iter().all(|r| r.converged) { Outcome::Done } else { Outcome::NotConverged })
}

/// Parses a `sweep.csv` written by [`cmd_sweep`].
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let bad = |what: &str| CcError::InvalidInput(format!("bad {what} in {}", path.display()));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(SweepRow {
            gamma: rec[0].parse().map_err(|_| bad("gamma"))?,
            converged: rec[1].parse().map_err(|_| bad("converged"))?,
            iterations: rec[2].parse().map_err(|_| bad("iterations"))?,
            rel_error: if &rec[3] == "NA" { None } else { Some(rec[3].parse().map_err(|_| bad("rel_error"))?) },
            pi: rec[4].parse().map_err(|_| bad("pi"))?,
            nu: rec[5].parse().map_err(|_| bad("nu"))?,
            rank: rec[6].parse().map_err(|_| bad("rank"))?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- decompose

pub fn load_solution(dir: &Path) -> Result<(ProblemInstance, SolutionFile)> {
    let instance = ProblemInstance::load(&dir.join("instance.json"))?;
    let solution: SolutionFile = read_json(&dir.join("solution.json"))?;
    Ok((instance, solution))
}

pub fn cmd_decompose(args: &DecomposeArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("decompose", args);
    let (instance, solution) = load_solution(&args.solution)?;
    manifest.instance_sha256 = Some(sha256_hex(instance.to_json().as_bytes()));
    let z = solution.z()?;
    let dec = manifest.time("factor", || factor_channels(&z, args.zero_tol))?;
    if !dec.signature.near_cut.is_empty() {
        log::warn!(
            "{} eigenvalues lie within a factor 10 of the zero cut {:e}",
            dec.signature.near_cut.len(),
            dec.signature.cut
        );
    }
    let out = args.out.clone().unwrap_or_else(|| args.solution.join("decomposition.json"));
    write_json(&out, &DecompositionExport::new(&dec))?;
    write_json(&out.with_file_name("decomposition.manifest.json"), &manifest)?;
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------- filter

/// Builds a realization from a solved `Z`.
///
/// The solver's `X` meets the linear constraint only to the primal
/// tolerance, so the covariance is re-derived as the Lyapunov solution for
/// the factored `Z = BHᵀ + HBᵀ`; that keeps the closed-loop identity at
/// rounding level. Returns the file and the relative deviation from the
/// solver's `X`.
pub fn build_realization(instance: &ProblemInstance, solution: &SolutionFile, mode: FilterMode, zero_tol: f64) -> Result<RealizationFile> {
    let a = instance.model.a();
    let z = solution.z()?;
    let x_solver = solution.x()?;
    let dec = factor_channels(&z, zero_tol)?;
    let z_fact = symmetrize(&(&dec.b * dec.h.transpose() + &dec.h * dec.b.transpose()));
    let x = symmetrize(&lyapunov_solve(a, &z_fact)?);
    let m = dec.b.ncols();
    let omega = Mat::identity(m, m);
    let (real, kkt) = match mode {
        FilterMode::Eq5c => (filter_gain(a, &x, &dec.b, &dec.h, &omega)?, None),
        FilterMode::Optimal => {
            let o = optimal_gain(a, &x, &dec.b, &omega)?;
            (o.realization, Some(o.kkt_residual))
        }
    };
    let mut file = RealizationFile::new(mode.as_str(), &real, Some(instance.data.e()));
    file.kkt_residual = kkt;
    file.structure_residual = Some(crate::realization::structure_residual(a, &x, &dec.b, &dec.h));
    file.solver_x_deviation = Some((&x - &x_solver).norm() / x_solver.norm());
    Ok(file)
}

pub fn cmd_filter(args: &FilterArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("filter", args);
    let (instance, solution) = load_solution(&args.solution)?;
    manifest.instance_sha256 = Some(sha256_hex(instance.to_json().as_bytes()));
    let file = manifest.time("realize", || build_realization(&instance, &solution, args.mode, args.zero_tol))?;
    let out = args.out.clone().unwrap_or_else(|| args.solution.join("realization.json"));
    write_json(&out, &file)?;
    write_json(&out.with_file_name("realization.manifest.json"), &manifest)?;
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Serialize)]
pub struct StatsFile {
    pub config: SimConfig,
    pub tail_start: f64,
    #[serde(rename = "sample_cov")]
    pub sample_cov: Vec<Vec<f64>>,
    pub comparison: CovarianceComparison,
    /// Relative error on the leading half block (positions for the benchmark).
    pub leading_block_relative: Option<f64>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("simulate", args);
    let file: RealizationFile = read_json(&args.realization)?;
    let real = file.into_realization()?;
    let mut cfg = SimConfig::for_realization(&real, args.traj, args.seed);
    if let Some(t) = args.tfinal {
        cfg.t_final = t;
        cfg.dt = t / 10_000.0;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    cfg.scheme = match args.scheme {
        SchemeArg::Exact => Scheme::Exact,
        SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
    };
    cfg.max_records = args.max_records;
    manifest.seeds.push(args.seed);
    manifest.resolve("t_final", cfg.t_final);
    manifest.resolve("dt", cfg.dt);
    let stats = manifest.time("simulate", || simulate_ensemble(&real, &cfg))?;
    let mask = file.mask()?;
    let comparison = compare_covariance(&stats.sample_cov, &real.x, mask.as_ref())?;
    let n = real.x.nrows();
    let leading = (n % 2 == 0 && n > 0).then(|| block_relative_error(&stats.sample_cov, &real.x, 0, n / 2));

    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| args.realization.parent().map(Path::to_path_buf).unwrap_or_default());
    ensure_dir(&dir)?;
    let csv_path = dir.join("stats.csv");
    let f = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_stats_csv(&stats, std::io::BufWriter::new(f))?;
    write_json(
        &dir.join("stats.json"),
        &StatsFile {
            config: cfg,
            tail_start: stats.tail_start,
            sample_cov: to_rows(&stats.sample_cov),
            comparison,
            leading_block_relative: leading,
        },
    )?;
    write_json(&dir.join("stats.manifest.json"), &manifest)?;
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------- diagnose

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("diagnose", args);
    let (instance, solution) = load_solution(&args.solution)?;
    manifest.instance_sha256 = Some(sha256_hex(instance.to_json().as_bytes()));
    let hist_path = args.solution.join("history.csv");
    if !hist_path.exists() {
        return Err(CcError::InvalidInput(format!("missing history: {}", hist_path.display())));
    }
    let history = read_history_csv(fs::File::open(&hist_path).map_err(io_err(&hist_path))?)?;
    let bundle = OperatorBundle::from_instance(&instance)?;
    let ybar = solution.dual()?;
    let it_path = args.solution.join("iterates.json");
    let iterates: Option<Vec<DualPoint>> = if it_path.exists() {
        let raw: Vec<IterateFile> = read_json(&it_path)?;
        Some(
            raw.iter()
                .map(|f| Ok(DualPoint::new(from_rows(&f.y1)?, from_rows(&f.y2)?)))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let y0 = match &iterates {
        Some(its) if !its.is_empty() => its[0].clone(),
        _ => initial_dual(&bundle, instance.gamma)?,
    };
    let mut diag: Diagnostics = diagnose(&bundle, instance.data.g(), instance.gamma, &y0, &ybar)?;
    if let Some(its) = &iterates {
        let rhos: Vec<f64> = history.iter().map(|r| r.rho).collect();
        diag.contraction = Some(check_contraction(its, &rhos, &ybar, diag.contraction_bound)?);
    }
    let out = args.out.clone().unwrap_or_else(|| args.solution.join("diagnostics.json"));
    write_json(&out, &diag)?;
    write_json(&out.with_file_name("diagnostics.manifest.json"), &manifest)?;
    Ok(Outcome::Done)
}

/// Solver kind recorded in a solution file.
pub fn solver_kind(name: &str) -> Option<SolverKind> {
    [SolverKind::AmaBb, SolverKind::Ama, SolverKind::AmaFixed, SolverKind::Admm]
        .into_iter()
        .find(|k| k.as_str() == name)
}
