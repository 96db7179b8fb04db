use num_complex::Complex64;

use super::{CMat, LinalgError};

type C = Complex64;

/// Pivots below this fraction of `‖A‖₁` are treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

fn one_norm(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl Lu {
    pub fn factor(a: &CMat) -> Result<Lu, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
        }
        let threshold = SINGULAR_PIVOT * one_norm(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, big) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if big <= threshold || big == 0.0 {
                return Err(LinalgError::Singular(big.max(0.0)));
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            {
                let mut col = lu.column_mut(k);
                for i in k + 1..n {
                    col[i] /= pivot;
                }
            }
            for j in k + 1..n {
                let f = lu[(k, j)];
                if f == C::new(0.0, 0.0) {
                    continue;
                }
                let (left, mut right) = lu.columns_range_pair_mut(k, j);
                for i in k + 1..n {
                    right[i] -= left[i] * f;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.lu.nrows();
        assert_eq!(b.nrows(), n, "right-hand side rows");
        let mut x = CMat::zeros(n, b.ncols());
        for col in 0..b.ncols() {
            let mut y: Vec<C> = self.perm.iter().map(|&p| b[(p, col)]).collect();
            for j in 0..n {
                let yj = y[j];
                if yj == C::new(0.0, 0.0) {
                    continue;
                }
                let lcol = self.lu.column(j);
                for i in j + 1..n {
                    y[i] -= lcol[i] * yj;
                }
            }
            for j in (0..n).rev() {
                let ucol = self.lu.column(j);
                y[j] /= ucol[j];
                let yj = y[j];
                for i in 0..j {
                    y[i] -= ucol[i] * yj;
                }
            }
            for i in 0..n {
                x[(i, col)] = y[i];
            }
        }
        x
    }

    /// Determinant from the factorization.
    pub fn determinant(&self) -> C {
        let n = self.lu.nrows();
        let mut det = C::new(1.0, 0.0);
        for i in 0..n {
            det *= self.lu[(i, i)];
        }
        // permutation parity
        let mut seen = vec![false; n];
        let mut sign = 1.0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.perm[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        det * sign
    }
}

/// Solves `A X = B` by partial-pivoted elimination.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    Ok(Lu::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CMat::identity(3, 3);
        let b = CMat::from_fn(3, 2, |i, j| C::new(i as f64, j as f64 - 1.0));
        assert_eq!(solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CMat::from_element(2, 2, C::new(1.0, 0.0));
        assert!(matches!(
            solve(&a, &CMat::identity(2, 2)),
            Err(LinalgError::Singular(_))
        ));
    }

    #[test]
    fn determinant_with_pivoting() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[C::new(0.0, 0.0), C::new(2.0, 0.0), C::new(3.0, 0.0), C::new(1.0, 0.0)],
        );
        let d = Lu::factor(&a).unwrap().determinant();
        assert!((d - C::new(-6.0, 0.0)).norm() < 1e-15);
    }
}
