use num_complex::Complex64;
use thiserror::Error;

use crate::expr::ExprError;
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("symmetry constraint violated (residual {0:e})")]
    SymmetryViolation(f64),
    #[error("expected a cluster of 1 or 2 eigenvalues, found {0}")]
    Multiplicity(usize),
    #[error("restricted quadratic form is degenerate (|det G| = {0:e})")]
    DegenerateForm(f64),
    #[error("perturbation series diverges (contraction bound K = {0})")]
    Divergence(f64),
    #[error("Newton iteration from seed {0} did not converge")]
    NewtonDivergence(Complex64),
    #[error("spectrum is not simple: {0}")]
    Simplicity(String),
    #[error("reality violated near {lambda}: found {found}")]
    RealityViolation { lambda: f64, found: Complex64 },
    #[error("bracket does not straddle a transition: {0}")]
    Bracket(String),
    #[error("truncation not converged: {0}")]
    Convergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("matrix file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the mathematics rejected the input, as opposed to the
    /// program failing to compute.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::SymmetryViolation(_)
                | Error::Multiplicity(_)
                | Error::DegenerateForm(_)
                | Error::Simplicity(_)
                | Error::RealityViolation { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_hypothesis_violation() {
            2
        } else {
            1
        }
    }
}
