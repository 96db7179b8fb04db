//! General complex eigensolver: Householder reduction to upper Hessenberg
//! form, implicit single-shift QR for the eigenvalues, inverse iteration on
//! the Hessenberg matrix for the eigenvectors.

use num_complex::Complex64;

use super::{frobenius, CMat, LinalgError};

type C = Complex64;

/// Eigenvalues sorted by real part, ties by imaginary part, with unit-norm
/// eigenvectors and their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C>,
    /// Eigenvectors as columns (unit 2-norm).
    pub eigenvectors: CMat,
    /// `‖A v - λ v‖` per pair.
    pub residuals: Vec<f64>,
    /// Frobenius norm of the decomposed matrix, the scale for residuals.
    pub matrix_norm: f64,
}

impl SpectralDecomposition {
    /// Pairs whose residual exceeds `tol·‖A‖`. At or near exceptional points
    /// these are expected rather than exceptional.
    pub fn near_defective(&self, tol: f64) -> Vec<usize> {
        self.residuals
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > tol * self.matrix_norm)
            .map(|(i, _)| i)
            .collect()
    }
}

#[inline]
fn abs1(z: C) -> f64 {
    z.re.abs() + z.im.abs()
}

pub(super) fn sort_spectrum(values: &mut [C]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

#[derive(Debug, Clone)]
struct Hessenberg {
    h: CMat,
    /// Householder vectors; reflector `k` acts on rows/cols `k+1..n`.
    reflectors: Vec<Vec<C>>,
}

fn reduce_to_hessenberg(a: &CMat) -> Hessenberg {
    let n = a.nrows();
    let mut h = a.clone();
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let data = h.as_mut_slice();
    let mut w = vec![C::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C> = data[k * n + k + 1..k * n + n].to_vec();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            C::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * norm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // left: rows k+1.., columns k..
        for j in k..n {
            reflect(&v, &mut data[j * n + k + 1..j * n + n]);
        }
        // right: all rows, columns k+1..
        w.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        for (t, vj) in v.iter().enumerate() {
            let col = &data[(k + 1 + t) * n..(k + 2 + t) * n];
            for (wi, ci) in w.iter_mut().zip(col) {
                *wi += ci * vj;
            }
        }
        for (t, vj) in v.iter().enumerate() {
            let f = vj.conj() * 2.0;
            let col = &mut data[(k + 1 + t) * n..(k + 2 + t) * n];
            for (ci, wi) in col.iter_mut().zip(&w) {
                *ci -= wi * f;
            }
        }
        data[k * n + k + 1] = alpha;
        for z in &mut data[k * n + k + 2..k * n + n] {
            *z = C::new(0.0, 0.0);
        }
        reflectors.push(v);
    }
    Hessenberg { h, reflectors }
}

fn two_by_two_eigenvalues(a: C, b: C, c: C, d: C) -> (C, C) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let mu1 = half_tr + root;
    let mu2 = half_tr - root;
    // recover the smaller root from the determinant to avoid cancellation
    let det = a * d - b * c;
    if mu1.norm() >= mu2.norm() {
        let other = if mu1.norm() > 0.0 { det / mu1 } else { mu2 };
        (mu1, other)
    } else {
        let other = if mu2.norm() > 0.0 { det / mu2 } else { mu1 };
        (other, mu2)
    }
}

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G·[x; y] = [r; 0]`.
#[inline]
fn givens(x: C, y: C) -> (f64, C) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, x * y.conj() / (ax * r))
}

/// Eigenvalues of an upper Hessenberg matrix (destroys the input).
fn hessenberg_eigenvalues(h: &mut CMat) -> Result<Vec<C>, LinalgError> {
    let n = h.nrows();
    let mut eig = vec![C::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let cap = (3 * n * n).max(100);
    let scale = frobenius(h).max(f64::MIN_POSITIVE);
    let mut total = 0usize;
    let mut its = 0usize;
    let mut hi = n as isize - 1;
    while hi >= 0 {
        let i = hi as usize;
        let mut l = i;
        while l > 0 {
            let mut s = abs1(h[(l - 1, l - 1)]) + abs1(h[(l, l)]);
            if s == 0.0 {
                s = scale;
            }
            if abs1(h[(l, l - 1)]) <= f64::EPSILON * s {
                h[(l, l - 1)] = C::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == i {
            eig[i] = h[(i, i)];
            hi -= 1;
            its = 0;
            continue;
        }
        if l + 1 == i {
            let (a, b) = two_by_two_eigenvalues(h[(l, l)], h[(l, i)], h[(i, l)], h[(i, i)]);
            eig[l] = a;
            eig[i] = b;
            hi -= 2;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > cap {
            return Err(LinalgError::Convergence(format!(
                "complex QR exceeded {cap} steps with {} eigenvalues left",
                i + 1
            )));
        }
        let shift = if its % 10 == 0 {
            h[(i, i)] + 0.75 * h[(i, i - 1)].re.abs()
        } else {
            let (m1, m2) = two_by_two_eigenvalues(
                h[(i - 1, i - 1)],
                h[(i - 1, i)],
                h[(i, i - 1)],
                h[(i, i)],
            );
            if (m1 - h[(i, i)]).norm() <= (m2 - h[(i, i)]).norm() {
                m1
            } else {
                m2
            }
        };
        // bulge chase on the active window l..=i
        let mut x = h[(l, l)] - shift;
        let mut y = h[(l + 1, l)];
        for k in l..i {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let sc = s.conj();
            let first_col = if k > l { k - 1 } else { l };
            let data = h.as_mut_slice();
            for j in first_col..=i {
                let pair = &mut data[j * n + k..j * n + k + 2];
                let (a, b) = (pair[0], pair[1]);
                pair[0] = a * c + s * b;
                pair[1] = b * c - sc * a;
            }
            if k > l {
                data[(k - 1) * n + k + 1] = C::new(0.0, 0.0);
            }
            let last_row = (k + 2).min(i);
            let (left, right) = data.split_at_mut((k + 1) * n);
            let col_k = &mut left[k * n + l..k * n + last_row + 1];
            let col_k1 = &mut right[l..last_row + 1];
            for (a, b) in col_k.iter_mut().zip(col_k1.iter_mut()) {
                let (x0, y0) = (*a, *b);
                *a = x0 * c + y0 * sc;
                *b = y0 * c - x0 * s;
            }
        }
    }
    Ok(eig)
}

/// Unitary reduction `A = Q H Q*` with `H` upper Hessenberg.
#[derive(Debug, Clone)]
pub struct HessenbergForm {
    hess: Hessenberg,
    norm: f64,
}

impl HessenbergForm {
    pub fn new(a: &CMat) -> Result<Self, LinalgError> {
        check_input(a)?;
        let hess = reduce_to_hessenberg(a);
        let norm = frobenius(&hess.h);
        Ok(HessenbergForm { hess, norm })
    }

    pub fn dim(&self) -> usize {
        self.hess.h.nrows()
    }

    pub fn h(&self) -> &CMat {
        &self.hess.h
    }

    /// `x <- Q* x`.
    pub fn apply_q_adjoint(&self, x: &mut [C]) {
        for (k, v) in self.hess.reflectors.iter().enumerate() {
            reflect(v, &mut x[k + 1..]);
        }
    }

    /// `x <- Q x`.
    pub fn apply_q(&self, x: &mut [C]) {
        for (k, v) in self.hess.reflectors.iter().enumerate().rev() {
            reflect(v, &mut x[k + 1..]);
        }
    }

    /// Eigenvalues of `A`, sorted as by [`eigvals_complex`].
    pub fn eigenvalues(&self) -> Result<Vec<C>, LinalgError> {
        let mut work = self.hess.h.clone();
        let mut values = hessenberg_eigenvalues(&mut work)?;
        sort_spectrum(&mut values);
        Ok(values)
    }

    /// LU factors of `H - λI`; exactly zero pivots become `tiny`.
    pub fn shifted_lu(&self, lambda: C, tiny: f64) -> ShiftedHessenbergLu {
        ShiftedHessenbergLu::factor(&self.hess.h, lambda, tiny)
    }

    /// Default replacement for zero pivots, `ε_mach ‖H‖_F`.
    pub fn tiny(&self) -> f64 {
        f64::EPSILON * self.norm.max(f64::MIN_POSITIVE)
    }
}

fn reflect(v: &[C], x: &mut [C]) {
    if v.is_empty() {
        return;
    }
    let mut s = C::new(0.0, 0.0);
    for (vi, xi) in v.iter().zip(x.iter()) {
        s += vi.conj() * xi;
    }
    let s2 = s * 2.0;
    for (vi, xi) in v.iter().zip(x.iter_mut()) {
        *xi -= vi * s2;
    }
}

/// Gaussian elimination of `H - λI` for upper Hessenberg `H`, with partial
/// pivoting between adjacent rows.
#[derive(Debug, Clone)]
pub struct ShiftedHessenbergLu {
    n: usize,
    /// Row-major upper triangle.
    u: Vec<C>,
    swaps: Vec<bool>,
    multipliers: Vec<C>,
    singular: bool,
}

impl ShiftedHessenbergLu {
    fn factor(h: &CMat, lambda: C, tiny: f64) -> Self {
        let n = h.nrows();
        let mut u = vec![C::new(0.0, 0.0); n * n];
        for j in 0..n {
            let col = h.column(j);
            for i in 0..n.min(j + 2) {
                u[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            u[i * n + i] -= lambda;
        }
        let mut swaps = vec![false; n.saturating_sub(1)];
        let mut multipliers = vec![C::new(0.0, 0.0); n.saturating_sub(1)];
        let mut singular = false;
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1) * n + k].norm() > u[k * n + k].norm() {
                let (top, bottom) = u.split_at_mut((k + 1) * n);
                top[k * n + k..k * n + n].swap_with_slice(&mut bottom[k..n]);
                swaps[k] = true;
            }
            if u[k * n + k].norm() == 0.0 {
                u[k * n + k] = C::new(tiny, 0.0);
                singular = true;
            }
            let m = u[(k + 1) * n + k] / u[k * n + k];
            multipliers[k] = m;
            if m.norm() != 0.0 {
                let (top, bottom) = u.split_at_mut((k + 1) * n);
                for (b, t) in bottom[k..n].iter_mut().zip(&top[k * n + k..k * n + n]) {
                    *b -= m * t;
                }
            }
        }
        if n > 0 && u[(n - 1) * n + n - 1].norm() == 0.0 {
            u[(n - 1) * n + n - 1] = C::new(tiny, 0.0);
            singular = true;
        }
        ShiftedHessenbergLu {
            n,
            u,
            swaps,
            multipliers,
            singular,
        }
    }

    /// Whether a zero pivot had to be replaced.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n.saturating_sub(1) {
            if self.swaps[k] {
                x.swap(k, k + 1);
            }
            let t = x[k];
            x[k + 1] -= self.multipliers[k] * t;
        }
        for i in (0..n).rev() {
            let row = &self.u[i * n + i + 1..i * n + n];
            let mut s = x[i];
            for (a, xj) in row.iter().zip(&x[i + 1..]) {
                s -= a * xj;
            }
            x[i] = s / self.u[i * n + i];
        }
        x
    }
}

fn normalize(v: &mut [C]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

/// Eigenvalues only, sorted by real part then imaginary part.
pub fn eigvals_complex(a: &CMat) -> Result<Vec<C>, LinalgError> {
    HessenbergForm::new(a)?.eigenvalues()
}

/// Full eigen-decomposition of a general complex matrix.
pub fn eig_complex(a: &CMat) -> Result<SpectralDecomposition, LinalgError> {
    let n = a.nrows();
    let form = HessenbergForm::new(a)?;
    let mut work = form.h().clone();
    let mut values = hessenberg_eigenvalues(&mut work)?;
    sort_spectrum(&mut values);

    let norm = frobenius(a);
    let tiny = form.tiny();
    let mut vectors = CMat::zeros(n, n);
    let mut residuals = Vec::with_capacity(n);
    for (col, &lambda) in values.iter().enumerate() {
        // perturb the shift slightly so the shifted matrix is never exactly singular
        let lu = form.shifted_lu(lambda + C::new(tiny, 0.0), tiny);
        let mut x = vec![C::new(1.0, 0.0); n];
        for _ in 0..3 {
            x = lu.solve(&x);
            normalize(&mut x);
        }
        form.apply_q(&mut x);
        normalize(&mut x);
        // fix the phase: largest component real and positive
        if let Some(big) = x
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        {
            if big.norm() > 0.0 {
                let phase = big.conj() / big.norm();
                for z in x.iter_mut() {
                    *z *= phase;
                }
            }
        }
        let mut r: Vec<C> = x.iter().map(|xi| -lambda * xi).collect();
        for (j, xj) in x.iter().enumerate() {
            for (ri, aij) in r.iter_mut().zip(a.column(j).iter()) {
                *ri += aij * xj;
            }
        }
        residuals.push(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        vectors.column_mut(col).copy_from_slice(&x);
    }
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        matrix_norm: norm,
    })
}

fn check_input(a: &CMat) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn rotation_generator_has_imaginary_spectrum() {
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let eig = eig_complex(&a).unwrap();
        assert!((eig.eigenvalues[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((eig.eigenvalues[1] - c(0.0, 1.0)).norm() < 1e-14);
        assert!(eig.residuals.iter().all(|&r| r < 1e-13));
    }

    #[test]
    fn antihermitian_coupling_splits_into_conjugate_pair() {
        // [[λ0, i ε w], [i ε w, λ0]]
        let (l0, ew) = (3.5, 0.02);
        let a = CMat::from_row_slice(2, 2, &[c(l0, 0.0), c(0.0, ew), c(0.0, ew), c(l0, 0.0)]);
        let ev = eigvals_complex(&a).unwrap();
        assert!((ev[0] - c(l0, -ew)).norm() < 1e-14);
        assert!((ev[1] - c(l0, ew)).norm() < 1e-14);
    }

    #[test]
    fn upper_triangular_input() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(2.0, 1.0),
                c(3.0, 0.0),
                c(0.0, 0.0),
                c(-2.0, 0.5),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.5, 0.0),
            ],
        );
        let eig = eig_complex(&a).unwrap();
        let expect = [c(-2.0, 0.5), c(0.5, 0.0), c(1.0, 0.0)];
        for (got, want) in eig.eigenvalues.iter().zip(expect) {
            assert!((got - want).norm() < 1e-13);
        }
        assert!(eig.residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn jordan_block_is_reported_with_honest_residual() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let eig = eig_complex(&a).unwrap();
        for v in &eig.eigenvalues {
            assert!((v - c(1.0, 0.0)).norm() < 1e-7);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let a = CMat::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(eig_complex(&a), Err(LinalgError::NonFinite)));
    }
}
