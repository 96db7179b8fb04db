//! Decision procedures: complex-pair prediction for degenerate and
//! near-degenerate pairs, and the small-coupling reality radius.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grushin::{default_cluster_tolerance, DegenerateBlock, GrushinOperators};
use crate::linalg::{eig_symmetric, eigvals_complex, op_norm, CMat, SymmetricEigen};
use crate::operator::{assemble_h0, OperatorFamily, ProblemSpec};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ComplexPairPredicted,
    RealPairPredicted,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub lambda0: f64,
    pub tau_product: f64,
    /// `[[H¹₁₁, H¹₁₂], [H¹₂₁, H¹₂₂]]`.
    pub h1: [[C; 2]; 2],
    pub discriminant: f64,
    pub verdict: Verdict,
    /// Heuristic validity radius of the first-order picture.
    pub epsilon_star: f64,
}

fn entries(h: &CMat) -> [[C; 2]; 2] {
    [[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]]
}

/// Complex pair when `τ₁τ₂ = -1` and `4|H₁₂|² > (H₁₁ - H₂₂)²`, real pair
/// when `τ₁τ₂ = +1`.
pub fn classify_degenerate(block: &DegenerateBlock, grushin: &GrushinOperators) -> Result<PairVerdict> {
    let h = &block.h1;
    let tau_product = block.tau_product();
    let diff = h[(0, 0)].re - h[(1, 1)].re;
    let discriminant = 4.0 * h[(0, 1)].norm_sqr() - diff * diff;
    let verdict = if tau_product > 0.0 {
        Verdict::RealPairPredicted
    } else if discriminant > 0.0 {
        Verdict::ComplexPairPredicted
    } else {
        Verdict::Inconclusive
    };
    let k = grushin.contraction(1.0, C::new(block.lambda0, 0.0))?;
    let series_radius = if k > 0.0 { 1.0 / k } else { f64::INFINITY };
    let h_norm = op_norm(h)?;
    let block_radius = if h_norm > 0.0 {
        1.0 / (2.0 * block.r * h_norm)
    } else {
        f64::INFINITY
    };
    Ok(PairVerdict {
        lambda0: block.lambda0,
        tau_product,
        h1: entries(h),
        discriminant,
        verdict,
        epsilon_star: series_radius.min(block_radius),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NearDegenerateVerdict {
    pub e1: f64,
    pub e2: f64,
    /// `E₂ - E₁`.
    pub d: f64,
    /// Distance of the pair to the rest of the spectrum.
    pub big_d: f64,
    pub epsilon: f64,
    pub tau_product: f64,
    pub h1: [[C; 2]; 2],
    /// `|εH₁₂|`.
    pub coupling: f64,
    /// `d/2`, against which the coupling is compared.
    pub threshold: f64,
    /// `d/(2D)`, the uncalibrated form of the threshold.
    pub raw_threshold: f64,
    /// `coupling - threshold`.
    pub margin: f64,
    /// Predicted coalescence coupling `d/(2|H₁₂|)`.
    pub predicted_epsilon_c: f64,
    pub verdict: Verdict,
}

/// Pair `E₁ < E₂` of simple eigenvalues (indices into `eig`) coupled by
/// `εH₁`. Hard verdicts are only given when `d/D ≤ 0.05`.
pub fn classify_near_degenerate(
    family: &OperatorFamily,
    eig: &SymmetricEigen,
    i1: usize,
    i2: usize,
    epsilon: f64,
) -> Result<NearDegenerateVerdict> {
    let n = eig.len();
    if i1 >= n || i2 >= n || i1 == i2 {
        return Err(Error::InvalidInput(format!("invalid eigenvalue indices {i1}, {i2}")));
    }
    let (i1, i2) = if eig.eigenvalues[i1] <= eig.eigenvalues[i2] { (i1, i2) } else { (i2, i1) };
    let (e1, e2) = (eig.eigenvalues[i1], eig.eigenvalues[i2]);
    for (idx, e) in [(i1, e1), (i2, e2)] {
        let tol = default_cluster_tolerance(e);
        if let Some(other) = (0..n).find(|&k| k != idx && (eig.eigenvalues[k] - e).abs() <= tol) {
            return Err(Error::Simplicity(format!(
                "eigenvalue {e} (index {idx}) is clustered with {} (index {other})",
                eig.eigenvalues[other]
            )));
        }
    }
    let d = e2 - e1;
    let big_d = (0..n)
        .filter(|&k| k != i1 && k != i2)
        .map(|k| (eig.eigenvalues[k] - e1).abs().min((eig.eigenvalues[k] - e2).abs()))
        .fold(f64::INFINITY, f64::min);
    let v = CMat::from_fn(n, 2, |i, j| C::new(eig.eigenvectors[(i, [i1, i2][j])], 0.0));
    let h = v.adjoint() * &family.h1 * &v;
    // simple eigenvectors of H₀ are J-eigenvectors; read off their signs
    let tau: Vec<f64> = (0..2)
        .map(|k| {
            let col: Vec<C> = v.column(k).iter().cloned().collect();
            let jv = family.j.apply(&col);
            jv.iter().zip(&col).map(|(a, b)| (a * b.conj()).re).sum::<f64>().signum()
        })
        .collect();
    let tau_product = tau[0] * tau[1];
    let coupling = (epsilon * h[(0, 1)]).norm();
    let threshold = d / 2.0;
    let h12 = h[(0, 1)].norm();
    let predicted_epsilon_c = if h12 > 0.0 { d / (2.0 * h12) } else { f64::INFINITY };
    let shifted = d + epsilon * (h[(1, 1)].re - h[(0, 0)].re);
    let discriminant = shifted * shifted + 4.0 * epsilon * epsilon * (h[(0, 1)] * h[(1, 0)]).re;
    let ratio = d / big_d;
    let verdict = if epsilon == 0.0 || tau_product > 0.0 {
        Verdict::RealPairPredicted
    } else if ratio > 0.05 {
        Verdict::Inconclusive
    } else if discriminant < 0.0 {
        Verdict::ComplexPairPredicted
    } else {
        Verdict::RealPairPredicted
    };
    Ok(NearDegenerateVerdict {
        e1,
        e2,
        d,
        big_d,
        epsilon,
        tau_product,
        h1: entries(&h),
        coupling,
        threshold,
        raw_threshold: d / (2.0 * big_d),
        margin: coupling - threshold,
        predicted_epsilon_c,
        verdict,
    })
}

/// Length of the prefix of `H₀` eigenvalues that move by less than
/// `tolerance` when the basis grows by 25%.
pub fn trusted_prefix(spec: &ProblemSpec, eig: &SymmetricEigen, tolerance: f64) -> Result<usize> {
    let modes = spec.basis.modes();
    let grown = ((modes as f64) * 1.25).ceil() as usize;
    let h0 = assemble_h0(&spec.basis.with_modes(grown)?, &spec.potential)?;
    let reference = eig_symmetric(&h0)?;
    Ok(eig
        .eigenvalues
        .iter()
        .zip(&reference.eigenvalues)
        .take_while(|(a, b)| (*a - *b).abs() < tolerance)
        .count())
}

#[derive(Debug, Clone, Serialize)]
pub struct RealityCertificate {
    pub delta: f64,
    pub h1_norm: f64,
    pub radius: f64,
    pub trusted_count: usize,
    pub trusted_eigenvalues: Vec<f64>,
}

/// `δ` from the trusted prefix and `r₀ = δ/‖H₁‖`.
pub fn reality_radius(family: &OperatorFamily, eig: &SymmetricEigen, trusted_count: usize) -> Result<RealityCertificate> {
    let count = trusted_count.min(eig.len());
    if count < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 trusted eigenvalues, have {count}")));
    }
    let trusted = &eig.eigenvalues[..count];
    let mut degenerate = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (k, w) in trusted.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if gap <= default_cluster_tolerance(w[0]) {
            degenerate.push(format!("λ{} = {} and λ{} = {}", k, w[0], k + 1, w[1]));
        }
        min_gap = min_gap.min(gap);
    }
    if !degenerate.is_empty() {
        return Err(Error::Simplicity(degenerate.join("; ")));
    }
    let norm = family.h1_operator_norm()?;
    if family.is_pt() && !norm.bounded {
        return Err(Error::Unsupported(
            "reality radius needs a bounded perturbation; W grows without bound".into(),
        ));
    }
    let delta = min_gap / 2.0;
    let h1_norm = norm.effective();
    Ok(RealityCertificate {
        delta,
        h1_norm,
        radius: if h1_norm > 0.0 { delta / h1_norm } else { f64::INFINITY },
        trusted_count: count,
        trusted_eigenvalues: trusted.to_vec(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SquareCheck {
    pub index: usize,
    pub center: f64,
    pub found: C,
    pub count_in_square: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealityReport {
    pub epsilon: f64,
    pub squares: Vec<SquareCheck>,
    pub max_imaginary: f64,
}

/// Diagonalizes `H(ε)` and checks each trusted eigenvalue: exactly one
/// eigenvalue in the open square of side `2δ` around it, and that one real.
pub fn verify_reality(family: &OperatorFamily, epsilon: f64, cert: &RealityCertificate) -> Result<RealityReport> {
    if epsilon.abs() >= cert.radius {
        return Err(Error::InvalidInput(format!(
            "|ε| = {} is outside the certified radius {}",
            epsilon.abs(),
            cert.radius
        )));
    }
    let spectrum = eigvals_complex(&family.evaluate_at(epsilon))?;
    let delta = cert.delta;
    let mut squares = Vec::new();
    let mut max_imaginary = 0.0_f64;
    for (l, &center) in cert.trusted_eigenvalues.iter().enumerate() {
        let inside: Vec<C> = spectrum
            .iter()
            .cloned()
            .filter(|z| (z.re - center).abs() < delta && z.im.abs() < delta)
            .collect();
        let found = inside.first().cloned().unwrap_or(C::new(f64::NAN, f64::NAN));
        if inside.len() != 1 || found.im.abs() > 1e-8 * (1.0 + center.abs()) {
            return Err(Error::RealityViolation { lambda: center, found });
        }
        max_imaginary = max_imaginary.max(found.im.abs());
        squares.push(SquareCheck {
            index: l,
            center,
            found,
            count_in_square: inside.len(),
        });
    }
    Ok(RealityReport {
        epsilon,
        squares,
        max_imaginary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub first_index: usize,
    pub last_index: usize,
}

/// Least-squares fit of `log λ_n = log A + p log n` over `first..=last`
/// (indices must be ≥ 1).
pub fn asymptotic_exponent(eigenvalues: &[f64], first: usize, last: usize) -> Result<PowerFit> {
    if first == 0 || last <= first || last >= eigenvalues.len() {
        return Err(Error::InvalidInput(format!("invalid fit range {first}..={last}")));
    }
    let xs: Vec<f64> = (first..=last).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = (first..=last).map(|n| eigenvalues[n].ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(PowerFit {
        exponent: slope,
        log_prefactor: intercept,
        r_squared: r2,
        first_index: first,
        last_index: last,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::HermiteBasis;
    use crate::expr::{Expression, Reflection};
    use crate::grushin::degenerate_block;
    use crate::operator::{assemble, Perturbation, DEFAULT_SYMMETRY_TOLERANCE};

    fn spec_1d(v: &str, w: &str, modes: usize, scale: f64) -> ProblemSpec {
        ProblemSpec {
            basis: HermiteBasis::new(1, modes, &[scale], 1.0).unwrap(),
            potential: Expression::parse(v, 1).unwrap(),
            perturbation: Perturbation::Pt(Expression::parse(w, 1).unwrap()),
            reflection: Reflection::about_origin(&[true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        }
    }

    fn oscillator_2d(w: &str) -> OperatorFamily {
        assemble(&ProblemSpec {
            basis: HermiteBasis::new(2, 10, &[1.0, std::f64::consts::FRAC_1_SQRT_2], 0.5).unwrap(),
            potential: Expression::parse("(x1^2 + 4*x2^2)/2", 2).unwrap(),
            perturbation: Perturbation::Pt(Expression::parse(w, 2).unwrap()),
            reflection: Reflection::about_origin(&[false, true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        })
        .unwrap()
    }

    #[test]
    fn harmonic_radius() {
        let f = assemble(&spec_1d("x^2", "x/(1+x^2)", 30, 1.0)).unwrap();
        let eig = eig_symmetric(&f.h0).unwrap();
        let c = reality_radius(&f, &eig, 10).unwrap();
        assert!((c.delta - 1.0).abs() < 1e-10);
        assert!((c.h1_norm - 0.5).abs() < 1e-6);
        assert!((c.radius - 2.0).abs() < 1e-5);
        let r = verify_reality(&f, 0.9 * c.radius, &c).unwrap();
        assert!(r.max_imaginary <= 1e-8);
        let r0 = verify_reality(&f, 0.0, &c).unwrap();
        for s in &r0.squares {
            assert!((s.found.re - s.center).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_spectrum_is_not_simple() {
        let f = oscillator_2d("x1^2*x2/(1+x1^2+x2^2)");
        let eig = eig_symmetric(&f.h0).unwrap();
        assert!(matches!(reality_radius(&f, &eig, 8), Err(Error::Simplicity(_))));
    }

    #[test]
    fn degenerate_pair_verdicts() {
        let f = oscillator_2d("x1^2*x2/(1+x1^2+x2^2)");
        let eig = eig_symmetric(&f.h0).unwrap();
        let b = degenerate_block(&f, &eig, 3.5, None).unwrap();
        let g = GrushinOperators::from_block(&f, &eig, &b).unwrap();
        let v = classify_degenerate(&b, &g).unwrap();
        assert_eq!(v.verdict, Verdict::ComplexPairPredicted);
        assert!(v.epsilon_star > 0.0 && v.epsilon_star.is_finite());

        let zero = oscillator_2d("0");
        let eig0 = eig_symmetric(&zero.h0).unwrap();
        let b0 = degenerate_block(&zero, &eig0, 3.5, None).unwrap();
        let g0 = GrushinOperators::from_block(&zero, &eig0, &b0).unwrap();
        let v0 = classify_degenerate(&b0, &g0).unwrap();
        assert_eq!(v0.discriminant, 0.0);
        assert_eq!(v0.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn same_parity_pair_is_real() {
        // k1 + 2 k2 = 2 with reflection in x1: (2,0) and (0,1) are both even
        let f = assemble(&ProblemSpec {
            basis: HermiteBasis::new(2, 10, &[1.0, std::f64::consts::FRAC_1_SQRT_2], 0.5).unwrap(),
            potential: Expression::parse("(x1^2 + 4*x2^2)/2", 2).unwrap(),
            perturbation: Perturbation::Pt(Expression::parse("x1/(1+x1^2+x2^2)", 2).unwrap()),
            reflection: Reflection::about_origin(&[true, false]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        })
        .unwrap();
        let eig = eig_symmetric(&f.h0).unwrap();
        let b = degenerate_block(&f, &eig, 3.5, None).unwrap();
        assert_eq!(b.tau_product(), 1.0);
        let g = GrushinOperators::from_block(&f, &eig, &b).unwrap();
        assert_eq!(classify_degenerate(&b, &g).unwrap().verdict, Verdict::RealPairPredicted);
        // H¹ Hermitian
        assert!(crate::linalg::frobenius(&(&b.h1 - b.h1.adjoint())) < 1e-10);
    }

    #[test]
    fn widely_split_pair_is_inconclusive() {
        let f = assemble(&spec_1d("x^2", "x/(1+x^2)", 30, 1.0)).unwrap();
        let eig = eig_symmetric(&f.h0).unwrap();
        let v = classify_near_degenerate(&f, &eig, 0, 1, 0.5).unwrap();
        assert_eq!(v.tau_product, -1.0);
        assert!((v.d - 2.0).abs() < 1e-10 && (v.big_d - 2.0).abs() < 1e-10);
        assert_eq!(v.verdict, Verdict::Inconclusive);
        let v0 = classify_near_degenerate(&f, &eig, 0, 1, 0.0).unwrap();
        assert_eq!(v0.verdict, Verdict::RealPairPredicted);
    }

    #[test]
    fn tunneling_pair_is_complex_at_small_coupling() {
        for (hbar, expect) in [(0.02, Verdict::ComplexPairPredicted), (0.12, Verdict::Inconclusive)] {
            let src = format!(
                "[problem]\nV = x^2*(1 + x)^2\nW = (x + 1/2)/(1 + (x + 1/2)^2)\nkinetic = {hbar}^2\n\
                 length_scale = sqrt({hbar})\ncenter = -1/2\nmodes = 60\n"
            );
            let spec = crate::io::RunConfig::parse(&src, std::path::Path::new(".")).unwrap().problem_spec().unwrap();
            let f = assemble(&spec).unwrap();
            let eig = eig_symmetric(&f.h0).unwrap();
            let v = classify_near_degenerate(&f, &eig, 0, 1, 1e-3).unwrap();
            assert_eq!(v.tau_product, -1.0);
            assert_eq!(v.verdict, expect, "hbar = {hbar}");
        }
    }

    #[test]
    fn exponent_fit_of_exact_power() {
        let ev: Vec<f64> = (0..30).map(|n| 2.0 * (n as f64).powf(4.0 / 3.0)).collect();
        let fit = asymptotic_exponent(&ev, 5, 29).unwrap();
        assert!((fit.exponent - 4.0 / 3.0).abs() < 1e-12);
        assert!((fit.log_prefactor - 2f64.ln()).abs() < 1e-12);
    }
}
