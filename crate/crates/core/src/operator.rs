//! Assembly of the operator family `H(ε) = H₀ + εH₁` and its involution.

use log::warn;
use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{FdGrid, HermiteBasis};
use crate::error::{Error, Result};
use crate::expr::{detect_parity, Expression, Parity, Reflection, DEFAULT_PARITY_SEED};
use crate::linalg::{complexify, frobenius, op_norm, CMat, RMat};

type C = Complex64;

pub const DEFAULT_SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Perturbation {
    /// `H₁ = i·W` for a real multiplication operator `W`.
    Pt(Expression),
    /// A user-supplied dense `H₁`, optionally with its own involution.
    Matrix { h1: CMat, j: Option<CMat> },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub basis: HermiteBasis,
    pub potential: Expression,
    pub perturbation: Perturbation,
    pub reflection: Reflection,
    pub symmetry_tolerance: f64,
}

/// A unitary involution in one of its cheap representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Involution {
    SignedDiagonal(Vec<f64>),
    Permutation(Vec<usize>),
    Dense(CMat),
}

impl Involution {
    pub fn len(&self) -> usize {
        match self {
            Involution::SignedDiagonal(s) => s.len(),
            Involution::Permutation(p) => p.len(),
            Involution::Dense(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_matrix(&self) -> CMat {
        let n = self.len();
        match self {
            Involution::SignedDiagonal(s) => CMat::from_fn(n, n, |i, j| {
                if i == j {
                    C::new(s[i], 0.0)
                } else {
                    C::new(0.0, 0.0)
                }
            }),
            Involution::Permutation(p) => CMat::from_fn(n, n, |i, j| {
                if p[i] == j {
                    C::new(1.0, 0.0)
                } else {
                    C::new(0.0, 0.0)
                }
            }),
            Involution::Dense(m) => m.clone(),
        }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        match self {
            Involution::SignedDiagonal(s) => v.iter().zip(s).map(|(x, &s)| x * s).collect(),
            Involution::Permutation(p) => p.iter().map(|&k| v[k]).collect(),
            Involution::Dense(m) => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
                .collect(),
        }
    }

    /// `J A`.
    pub fn left(&self, a: &CMat) -> CMat {
        match self {
            Involution::SignedDiagonal(s) => CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s[i]),
            Involution::Permutation(p) => CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(p[i], j)]),
            Involution::Dense(m) => m * a,
        }
    }

    /// `A J`.
    pub fn right(&self, a: &CMat) -> CMat {
        match self {
            Involution::SignedDiagonal(s) => CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s[j]),
            // (A P)_{ij} = A_{i,k} with p[k] = j; p is an involution so k = p[j]
            Involution::Permutation(p) => CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, p[j])]),
            Involution::Dense(m) => a * m,
        }
    }
}

/// Relative residual `‖J A - A* J‖ / ‖A‖`.
pub fn intertwining_residual(j: &Involution, a: &CMat) -> f64 {
    let scale = frobenius(a);
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(j.left(a) - j.right(&a.adjoint()))) / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryResiduals {
    pub h0: f64,
    pub h1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H1Norm {
    /// Spectral norm of the assembled matrix.
    pub matrix: f64,
    /// Estimate of `sup |W|` for the PT form.
    pub sup_estimate: Option<f64>,
    /// False when `|W|` keeps growing far outside the quadrature region.
    pub bounded: bool,
}

impl H1Norm {
    /// The norm used for radius estimates: the multiplication-operator
    /// bound when available, the matrix norm otherwise.
    pub fn effective(&self) -> f64 {
        self.sup_estimate.map_or(self.matrix, |s| s.max(self.matrix))
    }
}

#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pub h0: RMat,
    pub h1: CMat,
    pub j: Involution,
    pub residuals: SymmetryResiduals,
    pub valid: bool,
    pub warnings: Vec<String>,
    pub basis: Option<HermiteBasis>,
    w: Option<Expression>,
    tolerance: f64,
}

/// `c(-Δ) + V` in `basis`.
pub fn assemble_h0(basis: &HermiteBasis, potential: &Expression) -> Result<RMat> {
    Ok(basis.kinetic_matrix() + wrap(basis.potential_matrix(potential))?)
}

/// Builds `H₀ = c(-Δ) + V`, `H₁` and `J` and checks `JH = H*J` for both.
pub fn assemble(spec: &ProblemSpec) -> Result<OperatorFamily> {
    let basis = &spec.basis;
    let dim = basis.dimension();
    if spec.potential.dimension() != dim || spec.reflection.dimension() != dim {
        return Err(Error::InvalidInput(format!(
            "potential, reflection and basis must all be {dim}-dimensional"
        )));
    }
    let h0 = assemble_h0(basis, &spec.potential)?;
    let mut warnings = Vec::new();

    let parity_j = || -> Result<Involution> {
        if !spec.reflection.flags.iter().any(|&f| f) {
            return Err(Error::InvalidInput("reflection must flip at least one coordinate".into()));
        }
        for d in 0..dim {
            if spec.reflection.flags[d] && (spec.reflection.center[d] - basis.centers()[d]).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "reflection center {} and basis center {} differ on axis {}",
                    spec.reflection.center[d],
                    basis.centers()[d],
                    d + 1
                )));
            }
        }
        Ok(Involution::SignedDiagonal(basis.parity_signs(&spec.reflection.flags)))
    };

    let (h1, j, w) = match &spec.perturbation {
        Perturbation::Pt(w) => {
            if w.dimension() != dim {
                return Err(Error::InvalidInput(format!("W must be {dim}-dimensional")));
            }
            let parity = detect_parity(w.ast(), &spec.reflection, 64, DEFAULT_PARITY_SEED);
            if parity != Parity::Odd {
                let msg = format!("W = {} is {parity:?} under the reflection, not odd", w.source());
                warn!("{msg}");
                warnings.push(msg);
            }
            let wm = wrap(basis.potential_matrix(w))?;
            let h1 = wm.map(|v| C::new(0.0, v));
            (h1, parity_j()?, Some(w.clone()))
        }
        Perturbation::Matrix { h1, j } => {
            let n = basis.size();
            if h1.nrows() != n || h1.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "H1 is {}x{}, basis has {n} functions",
                    h1.nrows(),
                    h1.ncols()
                )));
            }
            let j = match j {
                Some(m) => Involution::Dense(check_involution(m, n)?),
                None => parity_j()?,
            };
            (h1.clone(), j, None)
        }
    };
    Ok(finish(h0, h1, j, warnings, Some(basis.clone()), w, spec.symmetry_tolerance))
}

/// Finite-difference counterpart of [`assemble`], with `J` the index
/// reversal of the grid.
pub fn assemble_fd(
    grid: &FdGrid,
    potential: &Expression,
    w: Option<&Expression>,
    kinetic_coefficient: f64,
) -> Result<OperatorFamily> {
    let h0 = grid.operator(potential, kinetic_coefficient)?;
    let n = h0.nrows();
    let mut warnings = Vec::new();
    let h1 = match w {
        Some(w) => {
            let reflection = Reflection::new(&[true], &[grid.center]);
            let parity = detect_parity(w.ast(), &reflection, 64, DEFAULT_PARITY_SEED);
            if parity != Parity::Odd {
                warnings.push(format!("W = {} is {parity:?} under the reflection, not odd", w.source()));
            }
            let vals = grid
                .interior()
                .iter()
                .map(|&x| w.evaluate(&[x]))
                .collect::<std::result::Result<Vec<f64>, _>>()?;
            CMat::from_fn(n, n, |i, j| if i == j { C::new(0.0, vals[i]) } else { C::new(0.0, 0.0) })
        }
        None => CMat::zeros(n, n),
    };
    Ok(finish(
        h0,
        h1,
        Involution::Permutation(grid.reversal()),
        warnings,
        None,
        w.cloned(),
        DEFAULT_SYMMETRY_TOLERANCE,
    ))
}

fn wrap(r: Result<RMat>) -> Result<RMat> {
    r.map_err(|e| match e {
        Error::Expr(x) => Error::Assembly(x.to_string()),
        other => other,
    })
}

fn check_involution(m: &CMat, n: usize) -> Result<CMat> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidInput(format!("J must be {n}x{n}")));
    }
    let herm = frobenius(&(m - m.adjoint()));
    let square = frobenius(&(m * m - CMat::identity(n, n)));
    if herm > 1e-12 * (n as f64).sqrt() || square > 1e-12 * (n as f64).sqrt() {
        return Err(Error::InvalidInput(format!(
            "J is not a self-adjoint involution (‖J - J*‖ = {herm:e}, ‖J² - I‖ = {square:e})"
        )));
    }
    Ok(m.clone())
}

fn finish(
    h0: RMat,
    h1: CMat,
    j: Involution,
    mut warnings: Vec<String>,
    basis: Option<HermiteBasis>,
    w: Option<Expression>,
    tolerance: f64,
) -> OperatorFamily {
    let residuals = SymmetryResiduals {
        h0: intertwining_residual(&j, &complexify(&h0)),
        h1: intertwining_residual(&j, &h1),
    };
    let valid = residuals.h0 <= tolerance && residuals.h1 <= tolerance;
    if !valid {
        let msg = format!(
            "symmetry residuals {:e} (H0), {:e} (H1) exceed tolerance {tolerance:e}",
            residuals.h0, residuals.h1
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    OperatorFamily {
        h0,
        h1,
        j,
        residuals,
        valid,
        warnings,
        basis,
        w,
        tolerance,
    }
}

impl OperatorFamily {
    pub fn size(&self) -> usize {
        self.h0.nrows()
    }

    /// `H₀ + εH₁`.
    pub fn evaluate_at(&self, epsilon: f64) -> CMat {
        let mut m = complexify(&self.h0);
        if epsilon != 0.0 {
            m += &self.h1 * C::new(epsilon, 0.0);
        }
        m
    }

    pub fn is_pt(&self) -> bool {
        self.w.is_some()
    }

    pub fn perturbation_expression(&self) -> Option<&Expression> {
        self.w.as_ref()
    }

    pub fn symmetry_tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Fails with the worse residual when the family does not satisfy the
    /// intertwining relations.
    pub fn require_valid(&self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            Err(Error::SymmetryViolation(self.residuals.h0.max(self.residuals.h1)))
        }
    }

    pub fn h1_operator_norm(&self) -> Result<H1Norm> {
        let matrix = op_norm(&self.h1)?;
        let (sup_estimate, bounded) = match (&self.w, &self.basis) {
            (Some(w), Some(basis)) => {
                let points = basis.quadrature_points()?;
                let (sup, bounded) = sup_abs(w, &points);
                (Some(sup), bounded)
            }
            (Some(w), None) => {
                let pts: Vec<Vec<f64>> = (-2000..=2000).map(|i| vec![i as f64 * 5e-3]).collect();
                let (sup, bounded) = sup_abs(w, &pts);
                (Some(sup), bounded)
            }
            _ => (None, true),
        };
        Ok(H1Norm {
            matrix,
            sup_estimate,
            bounded,
        })
    }
}

/// `max |f|` over `points`, refined by golden-section search around the
/// best few points, and a growth test far outside their hull.
fn sup_abs(f: &Expression, points: &[Vec<f64>]) -> (f64, bool) {
    let dim = f.dimension();
    let g = |p: &[f64]| f.evaluate(p).map(f64::abs).ok().filter(|v| v.is_finite());
    let mut scored: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| g(p).map(|v| (v, i)))
        .collect();
    if scored.is_empty() {
        return (0.0, true);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    // bracket half-widths from the spread of coordinates
    let mut radius = vec![0.0_f64; dim];
    let mut spacing = vec![1.0_f64; dim];
    for d in 0..dim {
        let mut coords: Vec<f64> = points.iter().map(|p| p[d]).collect();
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        radius[d] = coords.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if coords.len() > 1 {
            spacing[d] = 2.0 * (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
        }
    }
    for &(_, idx) in scored.iter().take(4) {
        let mut p = points[idx].clone();
        let mut current = g(&p).unwrap_or(0.0);
        for _sweep in 0..6 {
            for d in 0..dim {
                let (lo, hi) = (p[d] - spacing[d], p[d] + spacing[d]);
                let (x, v) = golden_max(|t| {
                    let mut q = p.clone();
                    q[d] = t;
                    g(&q).unwrap_or(f64::NEG_INFINITY)
                }, lo, hi);
                if v > current {
                    p[d] = x;
                    current = v;
                }
            }
        }
        best = best.max(current);
    }
    let far_scale = radius.iter().fold(1.0_f64, |m, &r| m.max(r));
    let mut bounded = true;
    for factor in [10.0, 100.0, 1000.0] {
        let directions: Vec<Vec<f64>> = match dim {
            1 => vec![vec![1.0], vec![-1.0]],
            _ => vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
                vec![0.6, 0.8],
                vec![-0.6, 0.8],
                vec![0.8, -0.6],
                vec![-0.8, -0.6],
            ],
        };
        for dir in directions {
            let q: Vec<f64> = dir.iter().map(|c| c * factor * far_scale).collect();
            if let Some(v) = g(&q) {
                if v > 1.5 * best {
                    bounded = false;
                }
            }
        }
    }
    (best, bounded)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str, d: usize) -> Expression {
        Expression::parse(s, d).unwrap()
    }

    fn oscillator_2d(modes: usize, w: &str) -> ProblemSpec {
        ProblemSpec {
            basis: HermiteBasis::new(2, modes, &[1.0, std::f64::consts::FRAC_1_SQRT_2], 0.5).unwrap(),
            potential: e("(x1^2 + 4*x2^2)/2", 2),
            perturbation: Perturbation::Pt(e(w, 2)),
            reflection: Reflection::about_origin(&[false, true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        }
    }

    #[test]
    fn anisotropic_oscillator_is_diagonal() {
        let f = assemble(&oscillator_2d(8, "x1^2*x2/(1+x1^2+x2^2)")).unwrap();
        for i in 0..64 {
            let (k1, k2) = (i / 8, i % 8);
            for j in 0..64 {
                let expect = if i == j { k1 as f64 + 2.0 * k2 as f64 + 1.5 } else { 0.0 };
                assert!((f.h0[(i, j)] - expect).abs() < 1e-12);
            }
        }
        assert!(f.valid);
        assert!(f.residuals.h1 < 1e-12 && f.residuals.h0 < 1e-12);
        assert!(f.warnings.is_empty());
    }

    #[test]
    fn even_perturbation_is_flagged() {
        let f = assemble(&oscillator_2d(6, "1")).unwrap();
        assert!(!f.valid);
        assert!((f.residuals.h1 - 2.0).abs() < 1e-12);
        assert!(matches!(f.require_valid(), Err(Error::SymmetryViolation(_))));
        assert!(!f.warnings.is_empty());
    }

    #[test]
    fn evaluate_at_is_linear_and_symmetric() {
        let f = assemble(&oscillator_2d(6, "x1^2*x2/(1+x1^2+x2^2)")).unwrap();
        assert_eq!(f.evaluate_at(0.0), complexify(&f.h0));
        let eps = 0.125;
        let diff = f.evaluate_at(2.0 * eps) - f.evaluate_at(eps);
        assert!(frobenius(&(diff - &f.h1 * C::new(eps, 0.0))) < 1e-15 * frobenius(&f.h1).max(1.0));
        assert!(intertwining_residual(&f.j, &f.evaluate_at(0.37)) < 1e-12);
    }

    #[test]
    fn sup_norm_of_bounded_odd_perturbation() {
        let spec = ProblemSpec {
            basis: HermiteBasis::new(1, 30, &[1.0], 1.0).unwrap(),
            potential: e("x^2", 1),
            perturbation: Perturbation::Pt(e("x/(1+x^2)", 1)),
            reflection: Reflection::about_origin(&[true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        };
        let n = assemble(&spec).unwrap().h1_operator_norm().unwrap();
        assert!((n.sup_estimate.unwrap() - 0.5).abs() < 1e-6);
        assert!(n.bounded);
        assert!(n.matrix <= 0.5 + 1e-6);
    }

    #[test]
    fn zero_perturbation_norm() {
        let spec = ProblemSpec {
            basis: HermiteBasis::new(1, 10, &[1.0], 1.0).unwrap(),
            potential: e("x^2", 1),
            perturbation: Perturbation::Pt(e("0", 1)),
            reflection: Reflection::about_origin(&[true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        };
        let n = assemble(&spec).unwrap().h1_operator_norm().unwrap();
        assert_eq!(n.matrix, 0.0);
        assert_eq!(n.sup_estimate, Some(0.0));
    }

    #[test]
    fn unbounded_perturbation_is_detected() {
        let f = assemble(&oscillator_2d(8, "x1^2*x2/(1+x1^2+x2^2)")).unwrap();
        let n = f.h1_operator_norm().unwrap();
        assert!(!n.bounded);
        assert!(n.matrix <= n.sup_estimate.unwrap() + 1e-6);
    }

    #[test]
    fn reflection_center_must_match_basis() {
        let spec = ProblemSpec {
            basis: HermiteBasis::new(1, 10, &[1.0], 1.0).unwrap(),
            potential: e("x^2*(1+x)^2", 1),
            perturbation: Perturbation::Pt(e("x + 1/2", 1)),
            reflection: Reflection::new(&[true], &[-0.5]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        };
        assert!(matches!(assemble(&spec), Err(Error::InvalidInput(_))));
        let centered = ProblemSpec {
            basis: spec.basis.clone().with_centers(&[-0.5]).unwrap(),
            ..spec
        };
        assert!(assemble(&centered).unwrap().valid);
    }

    #[test]
    fn finite_difference_family_uses_reversal() {
        let grid = FdGrid::new(6.0, 101).unwrap();
        let f = assemble_fd(&grid, &e("x^2", 1), Some(&e("x/(1+x^2)", 1)), 1.0).unwrap();
        assert!(matches!(f.j, Involution::Permutation(_)));
        assert!(f.valid, "{:?}", f.residuals);
    }

    #[test]
    fn dense_involution_round_trip() {
        let j = Involution::Permutation(vec![2, 1, 0]);
        let m = j.to_matrix();
        let a = CMat::from_fn(3, 3, |i, k| C::new(i as f64, k as f64 * 0.5));
        assert_eq!(j.left(&a), &m * &a);
        assert_eq!(j.right(&a), &a * &m);
        let s = Involution::SignedDiagonal(vec![1.0, -1.0, 1.0]);
        assert_eq!(s.left(&a), s.to_matrix() * &a);
    }
}
