use thiserror::Error;

/// Errors raised anywhere in the homogenization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hamiltonian specification: {0}")]
    InvalidSpec(String),

    #[error("integrator {integrator} cannot be used with this Hamiltonian: {reason}")]
    IncompatibleIntegrator { integrator: String, reason: String },

    #[error("implicit midpoint step did not converge at t={t} (residual {residual:e}); increase substeps")]
    NonConvergentImplicitStep { t: f64, residual: f64 },

    #[error("no translated orbit found for rotation {alpha:?} at k={k}")]
    NoOrbitFound { k: usize, alpha: Vec<f64> },

    #[error("Calabi invariant requires a compactly supported Hamiltonian")]
    UnsupportedCoercive,

    #[error("no generating function: fixed-point iteration contraction {contraction:.3} >= 1 at (q={q}, P={p}); shrink the step")]
    NoGeneratingFunction { q: f64, p: f64, contraction: f64 },

    #[error("grid budget exceeded: {cells} cells with {free_vars} free variables (budget {budget})")]
    GridBudgetExceeded { cells: usize, free_vars: usize, budget: usize },

    #[error("point {0:?} lies outside the landscape box")]
    OutOfBox(Vec<f64>),

    #[error("essential class of degree {degree} not found (negative index {negative_index})")]
    ClassNotFound { degree: usize, negative_index: usize },

    #[error("point {0:?} is on the boundary of the sampled domain")]
    BoundaryPoint(Vec<f64>),

    #[error("function is constant")]
    ConstantFunction,

    #[error("input is empty")]
    EmptyInput,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("rotation {alpha:?} lies outside the subdifferential hull {hull:?}")]
    InfeasibleAlpha { alpha: Vec<f64>, hull: Vec<Vec<f64>> },

    #[error("Hamiltonian is not convex in p: {0}")]
    NonConvexInput(String),

    #[error("landscape too large for the exhaustive oracle: {cells} cells")]
    TooLarge { cells: usize },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
