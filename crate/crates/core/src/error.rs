use thiserror::Error;

/// Input outside the domain of an operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{op}: non-finite input {value}")]
    NonFinite { op: &'static str, value: f64 },
    #[error("beta = {0} must lie in [0, 1]")]
    BetaOutOfRange(String),
    #[error("dimension N = {0} must be at least 3")]
    Dimension(u32),
    #[error("{0}")]
    Exponent(String),
    #[error("{0}")]
    Other(String),
}

/// Errors raised while evaluating potentials, norms and the functional.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{what} is not finite at node {node} (r = {r:e}); shrink r_max or change the potential")]
    Overflow { what: String, node: usize, r: f64 },
    #[error("profile is not in E: the weighted integral is infinite for every scale")]
    NotInE,
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Errors from the mountain-pass solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("endpoint search failed: check (g2)/theta>2 or mesh truncation (lambda exceeded {0:e})")]
    EndpointSearch(f64),
    #[error("rho certificate refused: empirical alpha = {alpha:e} <= 0 at rho = {rho:e}")]
    CertificateRefused { rho: f64, alpha: f64 },
    #[error("refinement precondition failed: gradient norm {0:e} above the hand-off threshold")]
    RefineStart(f64),
    #[error("refinement diverged after {iterations} iterations (gradient norm {grad_norm:e})")]
    Diverged { iterations: usize, grad_norm: f64, dump: Vec<f64> },
    #[error("negative nodal value {value:e} at node {node} exceeds the projection tolerance")]
    Negative { node: usize, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
