//! Grushin reduction of `H(ε) - z` onto a one- or two-dimensional
//! eigenspace of `H₀`: projector, canonical `τ`-basis, the blocks of the
//! unperturbed inverse, and the effective matrix `E₋₊(z)` whose
//! determinant vanishes exactly at eigenvalues of `H(ε)`.

use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{op_norm, op_norm_with, CMat, HessenbergForm, Lu, SymmetricEigen};
use crate::operator::{Involution, OperatorFamily};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

pub fn default_cluster_tolerance(lambda0: f64) -> f64 {
    1e-8 * (1.0 + lambda0.abs())
}

/// Eigenvectors of `H₀` whose eigenvalues lie within the tolerance of `λ₀`.
#[derive(Debug, Clone)]
pub struct SpectralProjector {
    pub lambda0: f64,
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns spanning the cluster.
    pub vectors: CMat,
}

impl SpectralProjector {
    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    /// `Π₀ = Σ e_j e_j*`.
    pub fn matrix(&self) -> CMat {
        &self.vectors * self.vectors.adjoint()
    }
}

pub fn spectral_projector(eig: &SymmetricEigen, lambda0: f64, tolerance: Option<f64>) -> Result<SpectralProjector> {
    let tol = tolerance.unwrap_or_else(|| default_cluster_tolerance(lambda0));
    let indices: Vec<usize> = (0..eig.len())
        .filter(|&k| (eig.eigenvalues[k] - lambda0).abs() <= tol)
        .collect();
    if indices.is_empty() || indices.len() > 2 {
        return Err(Error::Multiplicity(indices.len()));
    }
    Ok(projector_from_indices(eig, lambda0, &indices))
}

pub(crate) fn projector_from_indices(eig: &SymmetricEigen, lambda0: f64, indices: &[usize]) -> SpectralProjector {
    let n = eig.len();
    let vectors = CMat::from_fn(n, indices.len(), |i, j| C::new(eig.eigenvectors[(i, indices[j])], 0.0));
    SpectralProjector {
        lambda0,
        indices: indices.to_vec(),
        eigenvalues: indices.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors,
    }
}

/// A basis of a two-dimensional `J`-invariant space in which the form
/// `(Ju|u)` is `τ₁|u₁|² + τ₂|u₂|²`.
#[derive(Debug, Clone)]
pub struct TauBasis {
    pub e: CMat,
    pub tau: [f64; 2],
    pub gram_determinant: f64,
}

impl TauBasis {
    pub fn tau_product(&self) -> f64 {
        self.tau[0] * self.tau[1]
    }
}

/// Orthonormalizes the two columns of `v`, then diagonalizes the Gram
/// matrix `G_ij = (Jv_i|v_j)` of the restricted involution. The positive
/// sign comes first.
pub fn canonical_tau_basis(v: &CMat, j: &Involution) -> Result<TauBasis> {
    if v.ncols() != 2 || v.nrows() != j.len() {
        return Err(Error::InvalidInput(format!(
            "need an {}x2 pair of vectors, got {}x{}",
            j.len(),
            v.nrows(),
            v.ncols()
        )));
    }
    let q = orthonormalize(v)?;
    let jq = j.left(&q);
    // m = q* J q, Hermitian because J is
    let m = q.adjoint() * &jq;
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let det = a * d - b.norm_sqr();
    if det.abs() < 1e-10 {
        return Err(Error::DegenerateForm(det.abs()));
    }
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let values = [mean + rad, mean - rad];
    let u = hermitian_2x2_vectors(a, b, d, values);
    let mut e = &q * u;
    for (k, &g) in values.iter().enumerate() {
        let mut col = e.column_mut(k);
        col /= C::new(g.abs().sqrt(), 0.0);
        fix_phase(col.as_mut_slice());
    }
    Ok(TauBasis {
        e,
        tau: [values[0].signum(), values[1].signum()],
        gram_determinant: det,
    })
}

fn orthonormalize(v: &CMat) -> Result<CMat> {
    let mut q = v.clone();
    for k in 0..q.ncols() {
        for p in 0..k {
            let proj = q.column(p).dotc(&q.column(k));
            let qp = q.column(p).clone_owned();
            let mut col = q.column_mut(k);
            col -= qp * proj;
        }
        let norm = q.column(k).norm();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("eigenvector pair is linearly dependent".into()));
        }
        q.column_mut(k).unscale_mut(norm);
    }
    Ok(q)
}

/// Unitary eigenvector matrix of `[[a, b], [b̄, d]]` for the given values.
fn hermitian_2x2_vectors(a: f64, b: C, d: f64, values: [f64; 2]) -> CMat {
    if b.norm() <= 1e-15 * (a.abs() + d.abs()).max(1e-300) {
        return if a >= d {
            CMat::identity(2, 2)
        } else {
            CMat::from_row_slice(2, 2, &[ZERO, C::new(1.0, 0.0), C::new(1.0, 0.0), ZERO])
        };
    }
    let mut u = CMat::zeros(2, 2);
    for (k, &lam) in values.iter().enumerate() {
        // two null vectors of M - λ; keep the better conditioned
        let v1 = [b, C::new(lam - a, 0.0)];
        let v2 = [C::new(lam - d, 0.0), b.conj()];
        let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
        let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        u[(0, k)] = v[0] / n;
        u[(1, k)] = v[1] / n;
    }
    u
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
fn fix_phase(v: &mut [C]) {
    let mut best = 0.0;
    let mut phase = C::new(1.0, 0.0);
    for z in v.iter() {
        if z.norm() > best + 1e-14 * best {
            best = z.norm();
            phase = z.conj() / z.norm();
        }
    }
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// `H¹_jk = (H₁e_k|e_j) = e_j* H₁ e_k`, checked against
/// `τ_j H¹_jk = τ_k conj(H¹_kj)`.
pub fn effective_matrix(basis: &TauBasis, family: &OperatorFamily) -> Result<CMat> {
    let h = basis.e.adjoint() * &family.h1 * &basis.e;
    let residual = tau_constraint_residual(&h, basis.tau);
    let scale = h.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    if residual > 1e-10 * scale {
        return Err(Error::SymmetryViolation(residual));
    }
    Ok(h)
}

pub fn tau_constraint_residual(h: &CMat, tau: [f64; 2]) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..2 {
        for k in 0..2 {
            worst = worst.max((h[(j, k)] * tau[j] - h[(k, j)].conj() * tau[k]).norm());
        }
    }
    worst
}

/// The eigenspace data of a doubly degenerate eigenvalue.
#[derive(Debug, Clone)]
pub struct DegenerateBlock {
    pub lambda0: f64,
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub basis: TauBasis,
    pub h1: CMat,
    /// `‖E⁰(λ₀)‖ = max 1/|λ_k - λ₀|` over the rest of the spectrum.
    pub r: f64,
}

impl DegenerateBlock {
    pub fn tau(&self) -> [f64; 2] {
        self.basis.tau
    }

    pub fn tau_product(&self) -> f64 {
        self.basis.tau_product()
    }
}

pub fn degenerate_block(
    family: &OperatorFamily,
    eig: &SymmetricEigen,
    lambda0: f64,
    tolerance: Option<f64>,
) -> Result<DegenerateBlock> {
    let p = spectral_projector(eig, lambda0, tolerance)?;
    if p.rank() != 2 {
        return Err(Error::Multiplicity(p.rank()));
    }
    let basis = canonical_tau_basis(&p.vectors, &family.j)?;
    let h1 = effective_matrix(&basis, family)?;
    Ok(DegenerateBlock {
        lambda0,
        r: resolvent_gap(eig, &p.indices, lambda0),
        indices: p.indices,
        eigenvalues: p.eigenvalues,
        basis,
        h1,
    })
}

fn resolvent_gap(eig: &SymmetricEigen, cluster: &[usize], lambda0: f64) -> f64 {
    (0..eig.len())
        .filter(|k| !cluster.contains(k))
        .map(|k| 1.0 / (eig.eigenvalues[k] - lambda0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesValue {
    #[serde(skip)]
    pub matrix: CMat,
    pub tail_bound: f64,
    pub contraction: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    RealPair,
    ComplexConjugatePair,
    DefectiveTolerance,
}

#[derive(Debug, Clone, Serialize)]
pub struct NearPair {
    pub values: [C; 2],
    pub kind: PairKind,
    pub seeds: [C; 2],
    pub iterations: [usize; 2],
    pub contraction: f64,
}

/// Grushin operators for `H(ε) - z` around a cluster of `H₀`.
#[derive(Debug, Clone)]
pub struct GrushinOperators<'a> {
    family: &'a OperatorFamily,
    eig: &'a SymmetricEigen,
    lambda0: f64,
    /// `R₋`: columns `e_1, e_2`; `R₊ = R₋*`.
    e: CMat,
    tau: Vec<f64>,
    /// `R₊ H₀ R₋`; `(λ₀)I` for an exact degeneracy.
    a0: CMat,
    outside: Vec<usize>,
    r: f64,
    h1e_norm: f64,
    norm_at_lambda0: OnceLock<f64>,
}

impl<'a> GrushinOperators<'a> {
    pub fn from_block(family: &'a OperatorFamily, eig: &'a SymmetricEigen, block: &DegenerateBlock) -> Result<Self> {
        Self::new(family, eig, block.lambda0, &block.indices, block.basis.e.clone(), block.basis.tau.to_vec())
    }

    /// `e` must span the eigenvectors `indices` of `eig`.
    pub fn new(
        family: &'a OperatorFamily,
        eig: &'a SymmetricEigen,
        lambda0: f64,
        indices: &[usize],
        e: CMat,
        tau: Vec<f64>,
    ) -> Result<Self> {
        let n = eig.len();
        if e.nrows() != n || e.ncols() != indices.len() || tau.len() != indices.len() {
            return Err(Error::InvalidInput("Grushin block dimensions disagree".into()));
        }
        let outside: Vec<usize> = (0..n).filter(|k| !indices.contains(k)).collect();
        let a0 = e.adjoint() * crate::linalg::complexify(&family.h0) * &e;
        let a0 = (&a0 + a0.adjoint()) * C::new(0.5, 0.0);
        let h1e_norm = op_norm(&(&family.h1 * &e))?;
        Ok(GrushinOperators {
            family,
            eig,
            lambda0,
            r: resolvent_gap(eig, indices, lambda0),
            e,
            tau,
            a0,
            outside,
            h1e_norm,
            norm_at_lambda0: OnceLock::new(),
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// `R = ‖E⁰(λ₀)‖`.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rank(&self) -> usize {
        self.e.ncols()
    }

    pub fn r_minus(&self) -> &CMat {
        &self.e
    }

    pub fn r_plus(&self) -> CMat {
        self.e.adjoint()
    }

    pub fn a0(&self) -> &CMat {
        &self.a0
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// `‖R₊R₋ - I‖`.
    pub fn identity_residual(&self) -> f64 {
        let k = self.rank();
        crate::linalg::frobenius(&(self.r_plus() * &self.e - CMat::identity(k, k)))
    }

    /// `E⁰(z) x = Σ_{k outside} v_k (v_k · x) / (λ_k - z)`.
    pub fn e0_apply(&self, z: C, x: &[C]) -> Vec<C> {
        let v = &self.eig.eigenvectors;
        let re = DVector::from_iterator(x.len(), x.iter().map(|c| c.re));
        let im = DVector::from_iterator(x.len(), x.iter().map(|c| c.im));
        let (pr, pi) = (v.tr_mul(&re), v.tr_mul(&im));
        let mut cr = DVector::zeros(pr.len());
        let mut ci = DVector::zeros(pr.len());
        for &k in &self.outside {
            let c = C::new(pr[k], pi[k]) / (self.eig.eigenvalues[k] - z);
            cr[k] = c.re;
            ci[k] = c.im;
        }
        let (yr, yi) = (v * cr, v * ci);
        yr.iter().zip(yi.iter()).map(|(&a, &b)| C::new(a, b)).collect()
    }

    pub fn e0_matrix(&self, z: C) -> CMat {
        let n = self.eig.len();
        let mut m = CMat::zeros(n, n);
        for j in 0..n {
            let mut unit = vec![ZERO; n];
            unit[j] = C::new(1.0, 0.0);
            let col = self.e0_apply(z, &unit);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    fn h1_apply(&self, x: &[C]) -> Vec<C> {
        let h = &self.family.h1;
        let n = h.nrows();
        let mut y = vec![ZERO; n];
        for (j, xj) in x.iter().enumerate() {
            if *xj == ZERO {
                continue;
            }
            let col = h.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
        y
    }

    fn h1_adjoint_apply(&self, y: &[C]) -> Vec<C> {
        let h = &self.family.h1;
        (0..h.ncols())
            .map(|j| h.column(j).iter().zip(y).fold(ZERO, |s, (a, b)| s + a.conj() * b))
            .collect()
    }

    /// `K = |ε|·‖H₁E⁰(z)‖`.
    pub fn contraction(&self, epsilon: f64, z: C) -> Result<f64> {
        if epsilon == 0.0 {
            return Ok(0.0);
        }
        let n = self.eig.len();
        let norm = op_norm_with(
            n,
            |x| self.h1_apply(&self.e0_apply(z, x)),
            |y| self.e0_apply(z.conj(), &self.h1_adjoint_apply(y)),
        )?;
        Ok(epsilon.abs() * norm)
    }

    /// `‖H₁E⁰(λ₀)‖`, computed once.
    fn norm_at_lambda0(&self) -> Result<f64> {
        if let Some(v) = self.norm_at_lambda0.get() {
            return Ok(*v);
        }
        let v = self.contraction(1.0, C::new(self.lambda0, 0.0))?;
        Ok(*self.norm_at_lambda0.get_or_init(|| v))
    }

    /// Neumann expansion `E₋₊ = zI - A₀ + Σ_{n≥1} (-ε)ⁿ R₊(H₁E⁰)ⁿ⁻¹H₁R₋`
    /// truncated at `order`, with a bound on the discarded tail.
    pub fn series(&self, epsilon: f64, z: C, order: usize) -> Result<SeriesValue> {
        let k_bound = self.contraction(epsilon, z)?;
        if k_bound >= 1.0 {
            return Err(Error::Divergence(k_bound));
        }
        let k = self.rank();
        let mut m = CMat::identity(k, k) * z - &self.a0;
        let minus_eps = C::new(-epsilon, 0.0);
        for col in 0..k {
            let mut x = self.h1_apply(self.e.column(col).as_slice());
            let mut coeff = minus_eps;
            for n in 1..=order {
                for row in 0..k {
                    let dot = self.e.column(row).iter().zip(&x).fold(ZERO, |s, (e, xi)| s + e.conj() * xi);
                    m[(row, col)] += coeff * dot;
                }
                if n < order {
                    x = self.h1_apply(&self.e0_apply(z, &x));
                    coeff *= minus_eps;
                }
            }
        }
        let tail = if epsilon == 0.0 {
            0.0
        } else {
            epsilon.abs() * self.h1e_norm * k_bound.powi(order as i32) / (1.0 - k_bound)
        };
        Ok(SeriesValue {
            matrix: m,
            tail_bound: tail,
            contraction: k_bound,
            order,
        })
    }

    /// Bordered matrix `[[H(ε) - z, R₋], [R₊, 0]]`.
    pub fn bordered(&self, epsilon: f64, z: C) -> CMat {
        let n = self.eig.len();
        let k = self.rank();
        let h = self.family.evaluate_at(epsilon);
        let mut p = CMat::zeros(n + k, n + k);
        p.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            p[(i, i)] -= z;
        }
        p.view_mut((0, n), (n, k)).copy_from(&self.e);
        p.view_mut((n, 0), (k, n)).copy_from(&self.e.adjoint());
        p
    }

    /// `E₋₊(z)` from a direct solve of the bordered system.
    pub fn exact(&self, epsilon: f64, z: C) -> Result<CMat> {
        let n = self.eig.len();
        let k = self.rank();
        let lu = Lu::factor(&self.bordered(epsilon, z))?;
        let mut rhs = CMat::zeros(n + k, k);
        for j in 0..k {
            rhs[(n + j, j)] = C::new(1.0, 0.0);
        }
        let x = lu.solve(&rhs);
        Ok(x.view((n, 0), (k, k)).clone_owned())
    }

    /// `‖E₋₊(z̄)* τ - τ E₋₊(z)‖`.
    pub fn symmetry_residual(&self, epsilon: f64, z: C) -> Result<f64> {
        let a = self.exact(epsilon, z.conj())?;
        let b = if z.im == 0.0 { a.clone() } else { self.exact(epsilon, z)? };
        let k = self.rank();
        let tau = CMat::from_fn(k, k, |i, j| if i == j { C::new(self.tau[i], 0.0) } else { ZERO });
        Ok(crate::linalg::frobenius(&(a.adjoint() * &tau - &tau * b)))
    }

    /// First-order seeds: eigenvalues of `A₀ + εH¹`.
    pub fn seeds(&self, epsilon: f64) -> Vec<C> {
        let h = self.r_plus() * &self.family.h1 * &self.e;
        let m = &self.a0 + h * C::new(epsilon, 0.0);
        match self.rank() {
            1 => vec![m[(0, 0)]],
            _ => {
                let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                let mean = 0.5 * (a + d);
                let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
                vec![mean + disc, mean - disc]
            }
        }
    }

    fn det(&self, epsilon: f64, z: C) -> Result<C> {
        let m = self.exact(epsilon, z)?;
        Ok(det_small(&m))
    }

    /// Hessenberg reduction of `H(ε)` reused by every determinant at this
    /// coupling.
    fn resolvent_form<'f>(&self, form: &'f HessenbergForm) -> ResolventForm<'f> {
        let w = (0..self.rank())
            .map(|j| {
                let mut col = self.e.column(j).iter().copied().collect::<Vec<C>>();
                form.apply_q_adjoint(&mut col);
                col
            })
            .collect();
        ResolventForm { form, w }
    }

    /// `det E₋₊(z) = (-1)^k / det(R₊(H(ε) - z)⁻¹R₋)`, falling back to the
    /// bordered solve when `z` hits the spectrum of `H(ε)`.
    fn det_via(&self, form: &ResolventForm<'_>, epsilon: f64, z: C) -> Result<C> {
        let lu = form.form.shifted_lu(z, form.form.tiny());
        if !lu.is_singular() {
            let k = self.rank();
            let cols: Vec<Vec<C>> = form.w.iter().map(|w| lu.solve(w)).collect();
            let s = CMat::from_fn(k, k, |i, j| form.w[i].iter().zip(&cols[j]).fold(ZERO, |acc, (a, b)| acc + a.conj() * b));
            let d = det_small(&s);
            if d != ZERO && d.is_finite() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                return Ok(C::new(sign, 0.0) / d);
            }
        }
        self.det(epsilon, z)
    }

    /// Damped Newton on `det E₋₊(z) / Π(z - found)`, derivative by central
    /// differences.
    fn newton(&self, form: &ResolventForm<'_>, epsilon: f64, seed: C, found: &[C], h: f64) -> Result<(C, usize)> {
        let g = |z: C| -> Result<C> {
            let mut v = self.det_via(form, epsilon, z)?;
            for r in found {
                v /= z - r;
            }
            Ok(v)
        };
        let mut z = seed;
        let mut gz = g(z)?;
        for it in 1..=50 {
            if gz == ZERO {
                return Ok((z, it));
            }
            let dh = C::new(h, 0.0);
            let deriv = (g(z + dh)? - g(z - dh)?) / (2.0 * dh);
            if deriv == ZERO || !deriv.is_finite() {
                break;
            }
            let mut step = gz / deriv;
            let mut accepted = None;
            for _ in 0..8 {
                let cand = z - step;
                if let Ok(gc) = g(cand) {
                    if gc.norm() < gz.norm() || step.norm() <= 1e-12 * (1.0 + z.norm()) {
                        accepted = Some((cand, gc));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, gc)) = accepted else { break };
            let moved = (cand - z).norm();
            z = cand;
            gz = gc;
            if moved <= 1e-12 * (1.0 + z.norm()) {
                return Ok((z, it));
            }
        }
        Err(Error::NewtonDivergence(seed))
    }

    /// Roots of `det E₋₊` near `λ₀`, classified as a real pair, a
    /// conjugate pair, or too close to coalescence to tell.
    pub fn eigenvalues_near(&self, epsilon: f64) -> Result<NearPair> {
        if self.rank() != 2 {
            return Err(Error::Multiplicity(self.rank()));
        }
        self.eigenvalues_near_with(&HessenbergForm::new(&self.family.evaluate_at(epsilon))?, epsilon)
    }

    /// As [`Self::eigenvalues_near`], reusing a Hessenberg reduction of
    /// `H(ε)` computed by the caller.
    pub fn eigenvalues_near_with(&self, hessenberg: &HessenbergForm, epsilon: f64) -> Result<NearPair> {
        if self.rank() != 2 {
            return Err(Error::Multiplicity(self.rank()));
        }
        let s = self.seeds(epsilon);
        let seeds = [s[0], s[1]];
        let contraction = epsilon.abs() * self.norm_at_lambda0()?;
        if epsilon == 0.0 {
            return Ok(NearPair {
                values: [C::new(seeds[0].re, 0.0), C::new(seeds[1].re, 0.0)],
                kind: PairKind::RealPair,
                seeds,
                iterations: [0, 0],
                contraction,
            });
        }
        let spread = (seeds[0] - seeds[1]).norm();
        let scale = spread.max(epsilon.abs() * self.h1e_norm).max(1e-10 * (1.0 + self.lambda0.abs()));
        let h = 1e-4 * scale;
        let form = self.resolvent_form(hessenberg);
        let (z1, it1) = self.newton(&form, epsilon, seeds[0], &[], h)?;
        let mut second = seeds[1];
        if (second - z1).norm() < 1e-3 * scale {
            second = z1 + C::new(0.0, 0.5 * scale) * if z1.im >= 0.0 { -1.0 } else { 1.0 };
        }
        let (z2, it2) = self.newton(&form, epsilon, second, &[z1], h)?;
        let tol = 1e-10 * (1.0 + self.lambda0.abs());
        let (mut a, mut b) = (z1, z2);
        let kind = if (a - b).norm() < 1e-7 {
            PairKind::DefectiveTolerance
        } else if a.im.abs() <= tol && b.im.abs() <= tol {
            PairKind::RealPair
        } else {
            PairKind::ComplexConjugatePair
        };
        if kind == PairKind::ComplexConjugatePair && a.im * b.im < 0.0 {
            let avg = 0.5 * (a + b.conj());
            a = avg;
            b = avg.conj();
        }
        if a.im < b.im || (a.im == b.im && a.re < b.re) {
            std::mem::swap(&mut a, &mut b);
        }
        Ok(NearPair {
            values: [a, b],
            kind,
            seeds,
            iterations: [it1, it2],
            contraction,
        })
    }

    /// Winding number of `det E₋₊` around `|z - λ₀| = radius`, sampled at
    /// 32 points.
    pub fn root_count(&self, epsilon: f64, radius: f64) -> Result<i64> {
        let samples = 32;
        let hessenberg = HessenbergForm::new(&self.family.evaluate_at(epsilon))?;
        let form = self.resolvent_form(&hessenberg);
        let mut total = 0.0;
        let mut prev: Option<C> = None;
        let mut first = None;
        for k in 0..samples {
            let t = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let z = C::new(self.lambda0, 0.0) + C::from_polar(radius, t);
            let d = self.det_via(&form, epsilon, z)?;
            if let Some(p) = prev {
                total += (d / p).arg();
            } else {
                first = Some(d);
            }
            prev = Some(d);
        }
        if let (Some(p), Some(f)) = (prev, first) {
            total += (f / p).arg();
        }
        Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
    }
}

struct ResolventForm<'f> {
    form: &'f HessenbergForm,
    /// `Q* R₋`, one column per basis vector.
    w: Vec<Vec<C>>,
}

fn det_small(m: &CMat) -> C {
    match m.nrows() {
        1 => m[(0, 0)],
        _ => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
    }
}
