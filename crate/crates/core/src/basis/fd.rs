use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::linalg::{tridiagonal_eigen_first_components, RMat};

/// Uniform grid on `[c - L, c + L]` with `P` points including the two
/// Dirichlet endpoints; the `P - 2` interior points are the unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub half_width: f64,
    pub points: usize,
    pub center: f64,
}

impl FdGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if points < 16 {
            return Err(Error::InvalidInput(format!("grid needs at least 16 points, got {points}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput(format!("half width must be positive, got {half_width}")));
        }
        Ok(FdGrid {
            half_width,
            points,
            center: 0.0,
        })
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn interior(&self) -> Vec<f64> {
        let h = self.spacing();
        let left = self.center - self.half_width;
        (1..self.points - 1).map(|i| left + i as f64 * h).collect()
    }

    /// Diagonal and off-diagonal of `-c u'' + V u` by the 3-point stencil.
    pub fn tridiagonal(&self, v: &Expression, kinetic_coefficient: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if v.dimension() != 1 {
            return Err(Error::InvalidInput("finite-difference grid is one-dimensional".into()));
        }
        let h = self.spacing();
        let s = kinetic_coefficient / (h * h);
        let diag = self
            .interior()
            .iter()
            .map(|&x| Ok(2.0 * s + v.evaluate(&[x])?))
            .collect::<Result<Vec<f64>>>()?;
        let off = vec![-s; diag.len() - 1];
        Ok((diag, off))
    }

    pub fn operator(&self, v: &Expression, kinetic_coefficient: f64) -> Result<RMat> {
        let (diag, off) = self.tridiagonal(v, kinetic_coefficient)?;
        let n = diag.len();
        let mut a = RMat::from_diagonal(&nalgebra::DVector::from_vec(diag));
        for (i, &e) in off.iter().enumerate() {
            a[(i, i + 1)] = e;
            a[(i + 1, i)] = e;
        }
        debug_assert_eq!(a.nrows(), n);
        Ok(a)
    }

    /// Index reversal, the reflection about the grid center.
    pub fn reversal(&self) -> Vec<usize> {
        let n = self.points - 2;
        (0..n).rev().collect()
    }

    pub fn eigenvalues(&self, v: &Expression, kinetic_coefficient: f64) -> Result<Vec<f64>> {
        let (diag, off) = self.tridiagonal(v, kinetic_coefficient)?;
        Ok(tridiagonal_eigen_first_components(&diag, &off)?.0)
    }
}

/// Lowest `count` eigenvalues extrapolated from the grid and its
/// half-spacing refinement, cancelling the `O(h²)` stencil error.
pub fn richardson_eigenvalues(
    grid: &FdGrid,
    v: &Expression,
    kinetic_coefficient: f64,
    count: usize,
) -> Result<Vec<f64>> {
    let fine = FdGrid {
        points: 2 * grid.points - 1,
        ..grid.clone()
    };
    let a = grid.eigenvalues(v, kinetic_coefficient)?;
    let b = fine.eigenvalues(v, kinetic_coefficient)?;
    Ok(a.iter().zip(&b).take(count).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(s: &str) -> Expression {
        Expression::parse(s, 1).unwrap()
    }

    #[test]
    fn harmonic_ground_state() {
        let g = FdGrid::new(10.0, 400).unwrap();
        let e = g.eigenvalues(&expr("x^2"), 1.0).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn dirichlet_laplacian() {
        let g = FdGrid::new(2.0, 201).unwrap();
        let e = g.eigenvalues(&expr("0"), 1.0).unwrap();
        let h = g.spacing();
        for k in 1..=5 {
            let exact = (k as f64 * std::f64::consts::PI / 4.0).powi(2);
            // 3-point stencil error is exact²·h²/12 to leading order
            assert!((e[k - 1] - exact).abs() < exact * exact * h * h / 6.0 + 1e-12);
        }
    }

    #[test]
    fn quartic_ground_state() {
        let g = FdGrid::new(8.0, 800).unwrap();
        let e = g.eigenvalues(&expr("x^4"), 1.0).unwrap();
        assert!((e[0] - 1.0603620904841828).abs() < 1e-3);
    }

    #[test]
    fn grid_is_symmetric_and_operator_matches_tridiagonal() {
        let g = FdGrid::new(3.0, 21).unwrap();
        let x = g.interior();
        for (a, b) in x.iter().zip(x.iter().rev()) {
            assert!((a + b).abs() < 1e-14);
        }
        let op = g.operator(&expr("x^2"), 1.0).unwrap();
        let r = g.reversal();
        for i in 0..op.nrows() {
            for j in 0..op.ncols() {
                assert!((op[(i, j)] - op[(r[i], r[j])]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(FdGrid::new(1.0, 15).is_err());
    }
}
