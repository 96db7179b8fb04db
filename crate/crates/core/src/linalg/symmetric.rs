//! Real symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL with Wilkinson-type shifts.

use super::{LinalgError, RMat};

const MAX_QL_SWEEPS: usize = 60;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: RMat,
    /// `‖A v - λ v‖` per pair.
    pub residuals: Vec<f64>,
}

impl SymmetricEigen {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectral norm of the decomposed matrix.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Symmetric eigen-decomposition. The input must be symmetric to
/// `1e-12·‖A‖`; eigenvector signs are fixed so the largest-magnitude entry
/// of each column is positive.
pub fn eig_symmetric(a: &RMat) -> Result<SymmetricEigen, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: vec![],
            eigenvectors: RMat::zeros(0, 0),
            residuals: vec![],
        });
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let asym = (a - a.transpose()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) * (n as f64).sqrt() {
        return Err(LinalgError::NotSymmetric(asym));
    }

    // row-major working copy, symmetrized
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            z[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut z, n, &mut d, &mut e);
    // shift subdiagonal so e[i] couples i and i+1
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    tridiagonal_ql(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = RMat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut big = 0.0_f64;
        let mut sign = 1.0;
        for r in 0..n {
            let v = z[r * n + src];
            if v.abs() > big {
                big = v.abs();
                sign = v.signum();
            }
        }
        for r in 0..n {
            vectors[(r, col)] = sign * z[r * n + src];
        }
    }
    let av = a * &vectors;
    let residuals = (0..n)
        .map(|k| {
            (0..n)
                .map(|r| (av[(r, k)] - eigenvalues[k] * vectors[(r, k)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors: vectors,
        residuals,
    })
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off`, plus the first component of
/// each normalized eigenvector.
pub fn tridiagonal_eigen_first_components(
    diag: &[f64],
    off: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1), "off-diagonal length");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    // a single row of the identity: rotations only need to be tracked there
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    tridiagonal_ql(&mut d, &mut e, &mut z, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    Ok((
        order.iter().map(|&i| d[i]).collect(),
        order.iter().map(|&i| z[i]).collect(),
    ))
}

/// Householder reduction of the row-major symmetric matrix `a` to
/// tridiagonal form. On return `a` holds the orthogonal transform, `d` the
/// diagonal and `e[1..]` the subdiagonal.
fn householder_tridiagonalize(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[idx(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[idx(i, l)];
            } else {
                for k in 0..=l {
                    a[idx(i, k)] /= scale;
                    h += a[idx(i, k)] * a[idx(i, k)];
                }
                let mut f = a[idx(i, l)];
                let mut g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[idx(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[idx(j, i)] = a[idx(i, j)] / h;
                    g = 0.0;
                    for k in 0..=j {
                        g += a[idx(j, k)] * a[idx(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[idx(k, j)] * a[idx(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[idx(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[idx(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[idx(j, k)] -= f * e[k] + g * a[idx(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[idx(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let g: f64 = (0..i).map(|k| a[idx(i, k)] * a[idx(k, j)]).sum();
                for k in 0..i {
                    a[idx(k, j)] -= g * a[idx(k, i)];
                }
            }
        }
        d[i] = a[idx(i, i)];
        a[idx(i, i)] = 1.0;
        for j in 0..i {
            a[idx(j, i)] = 0.0;
            a[idx(i, j)] = 0.0;
        }
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. `z` is a row-major block
/// with `n` columns; its columns are rotated along with the iteration, so
/// passing the tridiagonalizing transform yields eigenvectors.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<(), LinalgError> {
    let rows = if n == 0 { 0 } else { z.len() / n };
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(LinalgError::Convergence(format!(
                    "tridiagonal QL did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..rows {
                    let zi = z[k * n + i];
                    let zi1 = z[k * n + i + 1];
                    z[k * n + i + 1] = s * zi + c * zi1;
                    z[k * n + i] = c * zi - s * zi1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
