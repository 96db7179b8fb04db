use num_complex::Complex64;

use super::{eig_symmetric, CMat, LinalgError, RMat};

type C = Complex64;

const RELATIVE_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;

/// Spectral norm of a dense matrix.
pub fn op_norm(a: &CMat) -> Result<f64, LinalgError> {
    let (rows, cols) = a.shape();
    op_norm_with(
        cols,
        |x| {
            let mut y = vec![C::new(0.0, 0.0); rows];
            for (j, xj) in x.iter().enumerate() {
                let col = a.column(j);
                for i in 0..rows {
                    y[i] += col[i] * xj;
                }
            }
            y
        },
        |y| {
            (0..cols)
                .map(|j| {
                    a.column(j)
                        .iter()
                        .zip(y)
                        .fold(C::new(0.0, 0.0), |s, (aij, yi)| s + aij.conj() * yi)
                })
                .collect()
        },
    )
}

/// Matrix-free spectral norm: `apply` computes `A x`, `apply_adjoint`
/// computes `A* y`; `n` is the dimension of the domain. Golub-Kahan-Lanczos
/// bidiagonalization with full reorthogonalization; the largest Ritz
/// singular value increases monotonically towards `‖A‖`.
pub fn op_norm_with<F, G>(n: usize, apply: F, apply_adjoint: G) -> Result<f64, LinalgError>
where
    F: Fn(&[C]) -> Vec<C>,
    G: Fn(&[C]) -> Vec<C>,
{
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic start vector with no special structure
    let mut v: Vec<C> = (0..n)
        .map(|i| {
            let t = i as f64 + 1.0;
            C::new(1.0 + 0.5 * (0.7 * t).sin(), 0.25 * (1.3 * t).cos())
        })
        .collect();
    normalize(&mut v);
    let mut us: Vec<Vec<C>> = Vec::new();
    let mut vs: Vec<Vec<C>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous = 0.0;
    for step in 0..n.min(MAX_ITERATIONS) {
        let mut u = apply(&v);
        if let (Some(b), Some(prev)) = (betas.last(), us.last()) {
            axpy(&mut u, -b, prev);
        }
        orthogonalize(&mut u, &us);
        let alpha = norm(&u);
        vs.push(v);
        if !alpha.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if alpha == 0.0 && step == 0 {
            // a zero image of a generic start means A = 0
            return Ok(0.0);
        }
        alphas.push(alpha);
        let sigma = top_singular_value(&alphas, &betas)?;
        let converged = (sigma - previous).abs() <= RELATIVE_TOLERANCE * sigma;
        previous = sigma;
        if converged || alpha <= f64::EPSILON * sigma {
            return Ok(sigma);
        }
        for z in u.iter_mut() {
            *z /= alpha;
        }
        let mut next = apply_adjoint(&u);
        axpy(&mut next, -alpha, vs.last().unwrap());
        us.push(u);
        orthogonalize(&mut next, &vs);
        let beta = norm(&next);
        if beta <= f64::EPSILON * sigma {
            return Ok(sigma);
        }
        for z in next.iter_mut() {
            *z /= beta;
        }
        betas.push(beta);
        v = next;
    }
    if previous > 0.0 {
        return Ok(previous);
    }
    Err(LinalgError::Convergence(format!(
        "Lanczos bidiagonalization did not reach relative tolerance {RELATIVE_TOLERANCE}"
    )))
}

/// Largest singular value of the upper bidiagonal matrix with diagonal
/// `alphas` and superdiagonal `betas`.
fn top_singular_value(alphas: &[f64], betas: &[f64]) -> Result<f64, LinalgError> {
    let k = alphas.len();
    let mut t = RMat::zeros(k, k);
    for j in 0..k {
        let b = if j > 0 { betas[j - 1] } else { 0.0 };
        t[(j, j)] = alphas[j] * alphas[j] + b * b;
        if j + 1 < k {
            t[(j, j + 1)] = alphas[j] * betas[j];
            t[(j + 1, j)] = alphas[j] * betas[j];
        }
    }
    let e = eig_symmetric(&t)?;
    Ok(e.eigenvalues[k - 1].max(0.0).sqrt())
}

fn axpy(y: &mut [C], a: f64, x: &[C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

/// Two passes of classical Gram-Schmidt.
fn orthogonalize(x: &mut [C], basis: &[Vec<C>]) {
    for _ in 0..2 {
        for q in basis {
            let d = q.iter().zip(x.iter()).fold(C::new(0.0, 0.0), |s, (qi, xi)| s + qi.conj() * xi);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= qi * d;
            }
        }
    }
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [C]) {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_norm() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C::new(1.0, 0.0),
            C::new(-3.0, 0.0),
            C::new(2.0, 0.0),
        ]));
        assert!((op_norm(&a).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_norm() {
        let u = nalgebra::DVector::from_vec(vec![C::new(1.0, 2.0), C::new(0.0, -1.0)]);
        let v = nalgebra::DVector::from_vec(vec![C::new(3.0, 0.0), C::new(1.0, 1.0), C::new(0.5, 0.0)]);
        let a = &u * v.adjoint();
        let expect = u.norm() * v.norm();
        assert!((op_norm(&a).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(op_norm(&CMat::zeros(4, 3)).unwrap(), 0.0);
    }
}
