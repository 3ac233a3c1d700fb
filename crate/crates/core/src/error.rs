use thiserror::Error;

/// Errors raised by the covariance-completion toolkit.
#[derive(Debug, Error)]
pub enum CcError {
    #[error("unstable generator: max Re(lambda) = {max_real:e}")]
    UnstableGenerator { max_real: f64 },

    #[error("ill-conditioned Schur back-substitution (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("dual point infeasible for logdet")]
    DualInfeasible,

    #[error("power iteration did not converge (last Rayleigh quotients {last:e}, {previous:e})")]
    PowerIteration { last: f64, previous: f64 },

    #[error("backtracking failed after {} trials (rho trace {rho_trace:?}, min eig {min_eig:e}, ascent slack {ascent_slack:e})", rho_trace.len())]
    Backtracking {
        rho_trace: Vec<f64>,
        /// Smallest eigenvalue of the adjoint at the last rejected candidate.
        min_eig: f64,
        /// J_d(Y+) minus the quadratic model; negative means insufficient ascent.
        ascent_slack: f64,
    },

    #[error("fixed step {rho:e} left the feasible domain at iteration {iteration}")]
    FixedStepInfeasible { rho: f64, iteration: usize },

    #[error("inner proximal-gradient loop hit {iterations} iterations (last relative change {last_change:e})")]
    InnerLoop { iterations: usize, last_change: f64 },

    #[error("nothing to factor: matrix is numerically zero")]
    NothingToFactor,

    #[error("inconsistent (X, B, H): structural residual {residual:e}")]
    InconsistentFactors { residual: f64 },

    #[error("closed-loop matrix is not Hurwitz (max Re(lambda) = {max_real:e})")]
    NotHurwitz { max_real: f64 },

    #[error("covariance assignment infeasible: least-squares residual {residual:e}")]
    Infeasible { residual: f64 },

    #[error("Lyapunov residual too large: {residual:e}")]
    LyapunovResidual { residual: f64 },

    #[error("discrete noise covariance has eigenvalue {eigenvalue:e} below tolerance")]
    NoiseCovariance { eigenvalue: f64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CcError {
    /// Process exit code used by the command-line tool and the C ABI.
    pub fn exit_code(&self) -> i32 {
        match self {
            CcError::DimensionMismatch { .. }
            | CcError::InvalidInput(_)
            | CcError::UnstableGenerator { .. }
            | CcError::Io { .. }
            | CcError::Json { .. }
            | CcError::Csv(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CcError>;
