//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("chart mismatch: {context}")]
    ChartMismatch { context: &'static str },
    #[error("metric is not positive definite at node {node} (min eigenvalue {min_eig:e})")]
    DegenerateMetric { node: usize, min_eig: f64 },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("invalid chart: {reason}")]
    InvalidChart { reason: String },
}

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weights require a box-with-boundary chart; got a periodic chart")]
    PeriodicChart,
    #[error("negative weight at node {node}: {value:e}")]
    NegativeWeight { node: usize, value: f64 },
    #[error("field is nonzero at node {node} where rho is clamped to 0; rho^-1 norm undefined")]
    SupportViolation { node: usize },
}

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("eigensolver did not converge after {iters} iterations; residual history {history:?}")]
    NoConvergence { iters: usize, history: Vec<f64> },
    #[error("factorization failed: matrix not positive definite after shift")]
    FactorizationFailed,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("metric is V-static (smallest singular value {sigma_min:e}, kernel dim {kernel_dim}); linearized problem is not solvable")]
    VStatic { sigma_min: f64, kernel_dim: usize },
    #[error("kernel verdict indeterminate: spectral gap {gap:.2} below mandated 1e2 at threshold {threshold:e}")]
    IndeterminateKernel { gap: f64, threshold: f64 },
    #[error("conjugate gradient stalled after {iters} iterations at relative residual {residual:e}")]
    CgStalled {
        iters: usize,
        residual: f64,
        curve: Vec<f64>,
    },
    #[error("residual increased across {count} consecutive iterates; smallness gate too loose")]
    Diverging { count: usize, trace: Vec<f64> },
    #[error("iterate lost positive definiteness at node {node} and step backoff failed")]
    PositivityLoss { node: usize },
    #[error("target norm {norm:e} exceeds smallness gate {gate:e}")]
    GateExceeded { norm: f64, gate: f64 },
    #[error("sigma target is nonzero at node {node} where rho is clamped to 0")]
    SupportViolation { node: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error)]
pub enum NeckError {
    #[error("transition zone resolved by {nodes} nodes; at least {required} required")]
    UnderResolved { nodes: usize, required: usize },
    #[error("invalid neck configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("T = {t} too small: measured contraction factor {factor:.3} >= 1")]
    TTooSmall { t: f64, factor: f64 },
    #[error("conformal factor lost positivity (min {min:e})")]
    PositivityLoss { min: f64 },
    #[error("|psi^-1 eta| = {ratio:.3} exceeds 1/4; quadratic term out of domain")]
    EtaOutOfDomain { ratio: f64 },
    #[error("non-positive conformal factor at node {node}")]
    NonPositivePsi { node: usize },
    #[error("error curve not monotone across the sweep; grid under-resolved")]
    NonMonotone,
    #[error("state has no solved correction; run the fixed point first")]
    Unsolved,
    #[error("input metric not normalized: {reason}")]
    NotNormalized { reason: String },
    #[error("banded solve failed: {reason}")]
    LinearSolve { reason: String },
    #[error(transparent)]
    Deform(#[from] SolveError),
}

#[derive(Debug, Error)]
pub enum ConvexError {
    #[error("mesh is not strictly convex: {reason}")]
    NonConvexMesh { reason: String },
    #[error("dimension {n} unsupported for this body kind: {reason}")]
    UnsupportedDim { n: usize, reason: String },
    #[error("integral of intrinsic scalar curvature is non-positive ({value:e})")]
    NonPositiveCurvatureIntegral { value: f64 },
    #[error("invalid body: {reason}")]
    InvalidBody { reason: String },
}
