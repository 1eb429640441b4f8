use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("number of sites {0} outside the supported range [2, 19]")]
    InvalidSiteCount(usize),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("bipartition cut {cut} must lie in [1, {max}]")]
    CutOutOfRange { cut: usize, max: usize },

    #[error("basis mismatch: {left} sites vs {right} sites")]
    BasisMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("dense diagonalization limited to N <= {max} sites (got {n_sites}); use the Lanczos path")]
    DenseGuard { n_sites: usize, max: usize },

    #[error("Lanczos did not converge within {iterations} iterations (residual {residual:e})")]
    LanczosNoConvergence { iterations: usize, residual: f64 },

    #[error("invalid ansatz shape: {0}")]
    InvalidShape(String),

    #[error("parameter vector has length {got}, ansatz expects {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("non-finite loss at iteration {iteration} (parameter hash {param_hash})")]
    NonFinite { iteration: usize, param_hash: String },

    #[error("pretraining stopped at infidelity {infidelity:e} after {iterations} iterations")]
    PretrainNoConvergence { iterations: usize, infidelity: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("gradient validation failed: {0}")]
    GradientGate(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
