use crate::problem::BoundaryKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    Domain(String),

    #[error("unsupported Hessian order k = {0}; nonlinear solvers accept k = 2 or k = 3")]
    UnsupportedOrder(u32),

    #[error("unsupported boundary kind {0:?} for this operation")]
    UnsupportedBoundary(BoundaryKind),

    #[error("invalid datum: {0}")]
    Datum(String),

    #[error("tabulated datum queried at s = {s} outside its sample range [{lo}, {hi}]")]
    Extrapolation { s: f64, lo: f64, hi: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("tolerance {0:e} outside the admissible range [1e-13, 1e-3]")]
    Tolerance(f64),

    #[error("step size underflow at t = {t} (h = {h:e}); the problem looks stiff")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("the planar system is non-autonomous (lambda = {0}); set lambda = 0")]
    NonAutonomous(f64),

    #[error("equilibrium at ({z}, {y}) has no one-dimensional {which} manifold")]
    NoManifold { z: f64, y: f64, which: &'static str },

    #[error("finite-difference stencil: {0}")]
    Stencil(String),

    #[error("tail truncation: {0}")]
    Truncation(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("assumption on the datum is not satisfied: {0}")]
    Assumption(String),

    #[error("monotone iteration lost its order at iterate {iterate}: {detail}")]
    IterationOrder { iterate: usize, detail: String },

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    MaxIterations { iterations: usize, last_update: f64 },

    #[error("Newton iteration diverged: {0}")]
    NoConvergence(String),

    #[error("singular Jacobian at lambda = {lambda} (pivot {pivot:e})")]
    SingularJacobian { lambda: f64, pivot: f64 },

    #[error("degenerate datum: g vanishes identically")]
    DegenerateDatum,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
