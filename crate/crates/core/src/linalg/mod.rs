//! Dense linear algebra kernels over `nalgebra` storage.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

mod complex_eig;
mod lu;
mod norm;
mod symmetric;

pub use complex_eig::{eig_complex, eigvals_complex, HessenbergForm, ShiftedHessenbergLu, SpectralDecomposition};
pub use lu::{solve, Lu, SINGULAR_PIVOT};
pub use norm::{op_norm, op_norm_with};
pub use symmetric::{eig_symmetric, tridiagonal_eigen_first_components, SymmetricEigen};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("iteration did not converge: {0}")]
    Convergence(String),
    #[error("matrix is singular to working precision (pivot {0:e})")]
    Singular(f64),
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Promotes a real matrix to complex.
pub fn complexify(a: &RMat) -> CMat {
    a.map(|v| Complex64::new(v, 0.0))
}

impl From<SymmetricEigen> for SpectralDecomposition {
    fn from(e: SymmetricEigen) -> Self {
        let matrix_norm = e.norm();
        SpectralDecomposition {
            eigenvalues: e.eigenvalues.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            eigenvectors: complexify(&e.eigenvectors),
            residuals: e.residuals,
            matrix_norm,
        }
    }
}
