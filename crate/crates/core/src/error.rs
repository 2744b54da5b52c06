use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("time {t} outside metric domain ({lo}, {hi})")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("{context}: matrix not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { context: String, min_eig: f64 },

    #[error("vector is not unit timelike: <nu,nu> = {norm} (want -1 within {tol:.1e})")]
    NotUnitTimelike { norm: f64, tol: f64 },

    #[error(
        "graph is not spacelike: min v^2 = {min_v2:.6e} at {count} of {total} points \
         (first offending index {first_index})"
    )]
    NotSpacelike {
        min_v2: f64,
        count: usize,
        total: usize,
        first_index: usize,
    },

    #[error("linear system is numerically singular (pivot ratio {pivot_ratio:.3e})")]
    SingularSystem { pivot_ratio: f64 },

    #[error(
        "Newton did not converge in {max_iter} iterations (last residual {last_residual:.3e}, \
         history: {history:?})"
    )]
    NewtonMaxIter {
        max_iter: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error(
        "Newton line search stalled at step {step:.3e} (residual {residual:.3e}, min v^2 {min_v2:.3e})"
    )]
    NewtonStall {
        step: f64,
        residual: f64,
        min_v2: f64,
    },

    #[error(
        "tau0 = {tau0} refused: the mean-curvature gate requires tau0 > sqrt(n*Lambda) = {threshold:.6} \
         (measured Lambda = {lambda:.6e}{})", if *.lambda_converged { "" } else { ", estimate did NOT converge" }
    )]
    GateRefused {
        tau0: f64,
        lambda: f64,
        threshold: f64,
        lambda_converged: bool,
    },

    #[error("stability potential not positive (min = {min_potential:.6e}); lapse solve refused")]
    StabilityNotPositive { min_potential: f64 },

    #[error(
        "continuation stalled at tau = {last_good_tau:.6} (step floor {dtau_min:.3e} reached): {detail}"
    )]
    ContinuationStall {
        last_good_tau: f64,
        dtau_min: f64,
        detail: String,
    },

    #[error("foliation ordering violated between tau = {tau_prev} and tau = {tau_next}: min(u_next - u_prev) = {min_gap:.3e}")]
    OrderingViolation {
        tau_prev: f64,
        tau_next: f64,
        min_gap: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("field contains non-finite values ({context})")]
    NonFinite { context: String },

    #[error("file format error in {path}: {detail}")]
    FileFormat { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
