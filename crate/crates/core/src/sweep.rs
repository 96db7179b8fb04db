//! Eigenvalue trajectories over a coupling grid, exceptional-point
//! location, and the double-well splitting fit.

use std::fmt::Write as _;

use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::linear_fit;
use crate::error::{Error, Result};
use crate::linalg::{eig_symmetric, eigvals_complex};
use crate::operator::{assemble, assemble_h0, OperatorFamily, ProblemSpec};

type C = Complex64;

/// Relative threshold on `|Im λ|` below which an eigenvalue counts as real.
pub const REALITY_THRESHOLD: f64 = 1e-10;

pub fn is_real(z: C) -> bool {
    z.im.abs() <= REALITY_THRESHOLD * (1.0 + z.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// The lowest eigenvalues at the first grid point.
    Count(usize),
    /// Eigenvalues whose real part lies in the interval at the first grid point.
    Interval(f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalPointRecord {
    pub epsilon_interval: (f64, f64),
    pub trajectories: (usize, usize),
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchingAmbiguity {
    pub epsilon: f64,
    pub trajectories: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTrace {
    pub epsilons: Vec<f64>,
    /// `trajectories[t][s]` is trajectory `t` at grid point `s`.
    pub trajectories: Vec<Vec<C>>,
    pub exceptional_points: Vec<ExceptionalPointRecord>,
    pub ambiguities: Vec<MatchingAmbiguity>,
}

impl SweepTrace {
    pub fn reality_flag(&self, t: usize, s: usize) -> bool {
        is_real(self.trajectories[t][s])
    }

    /// Columns `epsilon, trajectory_id, re, im, reality_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,trajectory_id,re,im,reality_flag\n");
        for (s, eps) in self.epsilons.iter().enumerate() {
            for (t, traj) in self.trajectories.iter().enumerate() {
                let z = traj[s];
                let _ = writeln!(out, "{eps:e},{t},{:.17e},{:.17e},{}", z.re, z.im, is_real(z) as u8);
            }
        }
        out
    }

    /// One whitespace-separated block per trajectory, blank-line separated.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# epsilon re im\n");
        for (t, traj) in self.trajectories.iter().enumerate() {
            let _ = writeln!(out, "# trajectory {t}");
            for (s, eps) in self.epsilons.iter().enumerate() {
                let _ = writeln!(out, "{eps:.10e} {:.17e} {:.17e}", traj[s].re, traj[s].im);
            }
            out.push_str("\n\n");
        }
        out
    }
}

/// Diagonalizes `H(ε)` on the grid and threads the selected eigenvalues
/// into trajectories by minimum squared-distance matching.
pub fn sweep(family: &OperatorFamily, epsilons: &[f64], window: Window) -> Result<SweepTrace> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("empty coupling grid".into()));
    }
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("coupling grid must be increasing".into()));
    }
    let spectra: Vec<Vec<C>> = epsilons
        .par_iter()
        .map(|&e| eigvals_complex(&family.evaluate_at(e)))
        .collect::<std::result::Result<_, _>>()?;

    let first: Vec<C> = match window {
        Window::Count(k) => {
            if k == 0 {
                return Err(Error::InvalidInput("window is empty".into()));
            }
            spectra[0].iter().take(k).cloned().collect()
        }
        Window::Interval(a, b) => spectra[0].iter().filter(|z| z.re >= a && z.re <= b).cloned().collect(),
    };
    if first.is_empty() {
        return Err(Error::InvalidInput("window selects no eigenvalues".into()));
    }
    let k = first.len();
    let mut trajectories: Vec<Vec<C>> = first.iter().map(|&z| vec![z]).collect();
    let mut ambiguities = Vec::new();
    for s in 1..epsilons.len() {
        let prev: Vec<C> = trajectories.iter().map(|t| t[s - 1]).collect();
        let (assignment, ties) = match_step(&prev, &spectra[s]);
        for (a, b) in ties {
            debug!("matching tie at ε = {} between trajectories {a} and {b}", epsilons[s]);
            ambiguities.push(MatchingAmbiguity {
                epsilon: epsilons[s],
                trajectories: (a, b),
            });
        }
        for t in 0..k {
            trajectories[t].push(spectra[s][assignment[t]]);
        }
    }
    let mut exceptional_points = Vec::new();
    for s in 0..epsilons.len().saturating_sub(1) {
        for a in 0..k {
            for b in a + 1..k {
                let (pa, pb) = (trajectories[a][s], trajectories[b][s]);
                let (na, nb) = (trajectories[a][s + 1], trajectories[b][s + 1]);
                if is_real(pa) && is_real(pb) && !is_real(na) && !is_real(nb) {
                    let scale = 1.0 + na.norm();
                    if (na - nb.conj()).norm() <= 1e-6 * scale {
                        exceptional_points.push(ExceptionalPointRecord {
                            epsilon_interval: (epsilons[s], epsilons[s + 1]),
                            trajectories: (a, b),
                            lambda: 0.5 * (na.re + nb.re),
                        });
                    }
                }
            }
        }
    }
    Ok(SweepTrace {
        epsilons: epsilons.to_vec(),
        trajectories,
        exceptional_points,
        ambiguities,
    })
}

/// Greedy nearest assignment followed by pairwise-swap and reassignment
/// repair. Returns the candidate index per trajectory and the pairs whose
/// swap changes the cost by less than `1e-12`.
fn match_step(prev: &[C], candidates: &[C]) -> (Vec<usize>, Vec<(usize, usize)>) {
    let cost = |t: usize, c: usize| (prev[t] - candidates[c]).norm_sqr();
    let k = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * candidates.len());
    for t in 0..k {
        for c in 0..candidates.len() {
            pairs.push((cost(t, c), t, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; k];
    let mut taken = vec![false; candidates.len()];
    for (_, t, c) in pairs {
        if assignment[t] == usize::MAX && !taken[c] {
            assignment[t] = c;
            taken[c] = true;
        }
    }
    for _ in 0..100 {
        let mut improved = false;
        for a in 0..k {
            for b in a + 1..k {
                let now = cost(a, assignment[a]) + cost(b, assignment[b]);
                let swapped = cost(a, assignment[b]) + cost(b, assignment[a]);
                if swapped < now - 1e-12 {
                    assignment.swap(a, b);
                    improved = true;
                }
            }
            for c in 0..candidates.len() {
                if !taken[c] && cost(a, c) < cost(a, assignment[a]) - 1e-12 {
                    taken[assignment[a]] = false;
                    taken[c] = true;
                    assignment[a] = c;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut ties = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if assignment[a] == assignment[b] {
                continue;
            }
            let now = cost(a, assignment[a]) + cost(b, assignment[b]);
            let swapped = cost(a, assignment[b]) + cost(b, assignment[a]);
            if (swapped - now).abs() < 1e-12 && candidates[assignment[a]] != candidates[assignment[b]] {
                ties.push((a, b));
            }
        }
    }
    (assignment, ties)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalPoint {
    pub epsilon: f64,
    pub width: f64,
    pub lambda: f64,
    pub bisections: usize,
}

/// The two eigenvalues of `H(ε)` nearest `target` and whether they have
/// left the real axis.
fn pair_state(family: &OperatorFamily, epsilon: f64, target: f64) -> Result<(bool, f64)> {
    let mut spectrum = eigvals_complex(&family.evaluate_at(epsilon))?;
    spectrum.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    let pair = [spectrum[0], spectrum[1]];
    let complex = pair.iter().any(|&z| !is_real(z));
    Ok((complex, 0.5 * (pair[0].re + pair[1].re)))
}

/// Bisection of the real-to-complex transition of the pair near `target`
/// inside `bracket`, to relative width `1e-6`.
pub fn locate_exceptional_point(family: &OperatorFamily, target: f64, bracket: (f64, f64)) -> Result<ExceptionalPoint> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Bracket(format!("empty bracket [{lo}, {hi}]")));
    }
    let (left_complex, mut centre) = pair_state(family, lo, target)?;
    if left_complex {
        return Err(Error::Bracket(format!("pair near {target} is already complex at ε = {lo}")));
    }
    let (right_complex, _) = pair_state(family, hi, centre)?;
    if !right_complex {
        return Err(Error::Bracket(format!("pair near {target} is still real at ε = {hi}")));
    }
    let mut steps = 0;
    while hi - lo > 1e-6 * 0.5 * (hi + lo).abs() {
        if steps >= 200 {
            return Err(Error::Bracket(format!("transition collapses onto ε = {lo}")));
        }
        let mid = 0.5 * (lo + hi);
        let (complex, c) = pair_state(family, mid, centre)?;
        centre = c;
        if complex {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    info!("exceptional point at ε ≈ {} after {steps} bisections", 0.5 * (lo + hi));
    Ok(ExceptionalPoint {
        epsilon: 0.5 * (lo + hi),
        width: hi - lo,
        lambda: centre,
        bisections: steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingLaw {
    /// `log d` linear in `1/p`.
    Inverse,
    /// `log d` linear in `1/p²`.
    InverseSquare,
}

impl SplittingLaw {
    pub fn abscissa(self, p: f64) -> f64 {
        match self {
            SplittingLaw::Inverse => 1.0 / p,
            SplittingLaw::InverseSquare => 1.0 / (p * p),
        }
    }

    fn other(self) -> Self {
        match self {
            SplittingLaw::Inverse => SplittingLaw::InverseSquare,
            SplittingLaw::InverseSquare => SplittingLaw::Inverse,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingSample {
    pub parameter: f64,
    pub e0: f64,
    pub e1: f64,
    pub d: f64,
    /// Largest move of the two lowest eigenvalues under 25% basis growth.
    pub truncation_shift: f64,
    /// `|(H₁ψ₁|ψ₀)|` when a perturbation is present.
    pub coupling: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawFit {
    pub law: SplittingLaw,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Coupling window `d_fit/(2w) < ε ≪ p/w` under one reading of the law.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingWindow {
    pub law: SplittingLaw,
    pub parameter: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingFit {
    pub samples: Vec<SplittingSample>,
    pub fit: LawFit,
    pub alternative: LawFit,
    pub windows: Vec<CouplingWindow>,
}

fn fit_law(samples: &[SplittingSample], law: SplittingLaw) -> LawFit {
    let xs: Vec<f64> = samples.iter().map(|s| law.abscissa(s.parameter)).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.d.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    LawFit {
        law,
        slope,
        intercept,
        r_squared,
    }
}

/// Splitting of the two lowest eigenvalues over a parameter family, fitted
/// as `log d = a·x(p) + b`. Each sample must be converged to `tolerance`
/// under 25% basis growth.
pub fn fit_splitting_law<F>(generate: F, parameters: &[f64], law: SplittingLaw, tolerance: f64) -> Result<SplittingFit>
where
    F: Fn(f64) -> Result<ProblemSpec> + Sync,
{
    if parameters.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 parameter samples, got {}",
            parameters.len()
        )));
    }
    let samples: Vec<SplittingSample> = parameters
        .par_iter()
        .map(|&p| -> Result<SplittingSample> {
            let spec = generate(p)?;
            let family = assemble(&spec)?;
            let eig = eig_symmetric(&family.h0)?;
            let grown = ((spec.basis.modes() as f64) * 1.25).ceil() as usize;
            let reference = eig_symmetric(&assemble_h0(&spec.basis.with_modes(grown)?, &spec.potential)?)?;
            let shift = (0..2)
                .map(|k| (eig.eigenvalues[k] - reference.eigenvalues[k]).abs())
                .fold(0.0, f64::max);
            if shift > tolerance {
                return Err(Error::Convergence(format!(
                    "lowest eigenvalues move by {shift:e} under basis growth at parameter {p}"
                )));
            }
            let (e0, e1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
            let d = e1 - e0;
            if d <= 0.0 {
                return Err(Error::Simplicity(format!("no splitting at parameter {p}")));
            }
            let coupling = family.is_pt().then(|| {
                let n = eig.len();
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        s += eig.eigenvectors[(i, 0)] * family.h1[(i, j)] * eig.eigenvectors[(j, 1)];
                    }
                }
                s.norm()
            });
            Ok(SplittingSample {
                parameter: p,
                e0,
                e1,
                d,
                truncation_shift: shift,
                coupling,
            })
        })
        .collect::<Result<_>>()?;
    let fit = fit_law(&samples, law);
    let alternative = fit_law(&samples, law.other());
    let mut windows = Vec::new();
    for s in &samples {
        if let Some(w) = s.coupling.filter(|&w| w > 0.0) {
            for f in [&fit, &alternative] {
                windows.push(CouplingWindow {
                    law: f.law,
                    parameter: s.parameter,
                    lower: (f.intercept + f.slope * f.law.abscissa(s.parameter)).exp() / (2.0 * w),
                    upper: s.parameter / w,
                });
            }
        }
    }
    Ok(SplittingFit {
        samples,
        fit,
        alternative,
        windows,
    })
}

/// Largest distance in a greedy pairing of `spectrum` with its complex
/// conjugate. Zero for a spectrum symmetric about the real axis.
pub fn conjugation_distance(spectrum: &[C]) -> f64 {
    let n = spectrum.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            pairs.push(((spectrum[a] - spectrum[b].conj()).norm(), a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used = vec![false; n];
    let mut worst = 0.0_f64;
    for (d, a, b) in pairs {
        if used[a] || used[b] {
            continue;
        }
        used[a] = true;
        used[b] = true;
        worst = worst.max(d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::HermiteBasis;
    use crate::expr::{Expression, Reflection};
    use crate::operator::{Perturbation, DEFAULT_SYMMETRY_TOLERANCE};

    #[test]
    fn conjugation_distance_of_closed_and_open_sets() {
        let z = |re, im| C::new(re, im);
        assert_eq!(conjugation_distance(&[z(1.0, 0.0), z(2.0, 3.0), z(2.0, -3.0)]), 0.0);
        assert!((conjugation_distance(&[z(1.0, 0.0), z(2.0, 3.0), z(2.0, -2.5)]) - 0.5).abs() < 1e-15);
        assert!((conjugation_distance(&[z(0.0, 1.0)]) - 2.0).abs() < 1e-15);
    }

    fn family(v: &str, w: &str, modes: usize) -> OperatorFamily {
        assemble(&ProblemSpec {
            basis: HermiteBasis::new(1, modes, &[1.0], 1.0).unwrap(),
            potential: Expression::parse(v, 1).unwrap(),
            perturbation: Perturbation::Pt(Expression::parse(w, 1).unwrap()),
            reflection: Reflection::about_origin(&[true]),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        })
        .unwrap()
    }

    #[test]
    fn single_point_grid_gives_unperturbed_spectrum() {
        let f = family("x^2", "x/(1+x^2)", 20);
        let t = sweep(&f, &[0.0], Window::Count(4)).unwrap();
        for (k, traj) in t.trajectories.iter().enumerate() {
            assert!((traj[0].re - (2 * k + 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_trajectories_stay_real_inside_radius() {
        let f = family("x^2", "x/(1+x^2)", 24);
        let grid: Vec<f64> = (0..10).map(|i| 0.18 * i as f64).collect();
        let t = sweep(&f, &grid, Window::Count(5)).unwrap();
        for traj in &t.trajectories {
            assert!(traj.iter().all(|&z| is_real(z)));
        }
        assert!(t.exceptional_points.is_empty());
    }

    #[test]
    fn imaginary_shift_keeps_spectrum_real() {
        // i·x couples the two lowest oscillator levels strongly
        let f = family("x^2", "x", 30);
        let grid: Vec<f64> = (0..41).map(|i| 0.1 * i as f64).collect();
        let t = sweep(&f, &grid, Window::Count(2)).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("epsilon,trajectory_id,re,im,reality_flag\n"));
        assert_eq!(csv.lines().count(), 1 + 41 * 2);
        // H = p² + x² + iεx = p² + (x + iε/2)² + ε²/4 stays real: no crossing
        assert!(t.exceptional_points.is_empty());
    }

    #[test]
    fn bracket_errors() {
        let f = family("x^2", "x/(1+x^2)", 20);
        assert!(matches!(locate_exceptional_point(&f, 1.0, (0.1, 0.5)), Err(Error::Bracket(_))));
        assert!(matches!(locate_exceptional_point(&f, 1.0, (0.5, 0.1)), Err(Error::Bracket(_))));
    }

    #[test]
    fn matching_follows_nearest_candidates() {
        let prev = [C::new(0.0, 0.0), C::new(1.0, 0.0)];
        let cand = [C::new(1.1, 0.0), C::new(0.05, 0.0), C::new(5.0, 0.0)];
        let (a, ties) = match_step(&prev, &cand);
        assert_eq!(a, vec![1, 0]);
        assert!(ties.is_empty());
        // a conjugate pair emerging from a double point: equal costs
        let prev = [C::new(1.0, 0.0), C::new(1.0, 0.0)];
        let cand = [C::new(1.0, -0.1), C::new(1.0, 0.1)];
        let (a, ties) = match_step(&prev, &cand);
        assert_eq!(a, vec![0, 1]);
        assert_eq!(ties, vec![(0, 1)]);
    }
}
